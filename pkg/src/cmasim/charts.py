"""Self-contained deterministic SVG charts for experiment reports.

The emitter is a pure function of the report contents: identical reports
produce byte-identical SVG text. Bar charts draw one <rect> per row; line
charts draw one <circle> per data point plus a <polyline> per series.
"""

from __future__ import annotations

from .experiments import ExperimentReport, format_number

WIDTH = 640
HEIGHT = 400
MARGIN_LEFT = 70
MARGIN_RIGHT = 150
MARGIN_TOP = 40
MARGIN_BOTTOM = 60

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _fmt(value: float) -> str:
    return format_number(float(value))


def _axes(title: str, x_label: str, y_label: str) -> list[str]:
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP
    return [
        f'<text x="{(x0 + x1) // 2}" y="20" text-anchor="middle" '
        f'font-size="14">{title}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="12">{x_label}</text>',
        f'<text x="16" y="{(y0 + y1) // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {(y0 + y1) // 2})">{y_label}</text>',
    ]


def _y_ticks(lo: float, hi: float) -> list[str]:
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    y1 = MARGIN_TOP
    parts = []
    for i in range(5):
        frac = i / 4
        value = lo + frac * (hi - lo)
        y = y0 - frac * (y0 - y1)
        parts.append(
            f'<line x1="{x0 - 4}" y1="{_fmt(y)}" x2="{x0}" y2="{_fmt(y)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x0 - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-size="11">{_fmt(value)}</text>'
        )
    return parts


def _span(values: list[float], floor_zero: bool) -> tuple[float, float]:
    lo = min(values)
    hi = max(values)
    if floor_zero:
        lo = min(0.0, lo)
        hi = max(hi, 0.0)
    if hi == lo:
        hi = lo + 1.0
    return lo, hi


def _emit_line(report: ExperimentReport) -> list[str]:
    xi = report.column_index(report.x_key)
    yi = report.column_index(report.y_key)
    if report.group_key is not None:
        gi = report.column_index(report.group_key)
        groups: list = []
        for row in report.rows:
            if row[gi] not in groups:
                groups.append(row[gi])
        series = {g: [(r[xi], r[yi]) for r in report.rows if r[gi] == g] for g in groups}
    else:
        series = {None: [(r[xi], r[yi]) for r in report.rows]}

    all_x = [float(x) for pts in series.values() for x, _ in pts]
    all_y = [float(y) for pts in series.values() for _, y in pts]
    x_lo, x_hi = _span(all_x, floor_zero=False)
    y_lo, y_hi = _span(all_y, floor_zero=True)

    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP

    def sx(x: float) -> float:
        return x0 + (x - x_lo) / (x_hi - x_lo) * (x1 - x0)

    def sy(y: float) -> float:
        return y0 - (y - y_lo) / (y_hi - y_lo) * (y0 - y1)

    parts = _y_ticks(y_lo, y_hi)
    for i in range(5):
        value = x_lo + i / 4 * (x_hi - x_lo)
        x = sx(value)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{y0}" x2="{_fmt(x)}" y2="{y0 + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{y0 + 18}" text-anchor="middle" '
            f'font-size="11">{_fmt(value)}</text>'
        )
    for g_idx, (group, points) in enumerate(series.items()):
        color = PALETTE[g_idx % len(PALETTE)]
        coords = " ".join(f"{_fmt(sx(float(x)))},{_fmt(sy(float(y)))}" for x, y in points)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}"/>')
        for x, y in points:
            parts.append(
                f'<circle cx="{_fmt(sx(float(x)))}" cy="{_fmt(sy(float(y)))}" '
                f'r="3" fill="{color}"/>'
            )
        if group is not None:
            ly = MARGIN_TOP + 14 + 16 * g_idx
            parts.append(
                f'<circle cx="{x1 + 14}" cy="{ly - 4}" r="4" fill="{color}"/>'
            )
            parts.append(
                f'<text x="{x1 + 24}" y="{ly}" font-size="11">{group}</text>'
            )
    return parts


def _emit_bar(report: ExperimentReport) -> list[str]:
    yi = report.column_index(report.y_key)
    values = [float(r[yi]) for r in report.rows]
    labels = report.row_labels
    if labels is None:
        xi = report.column_index(report.x_key)
        labels = tuple(str(r[xi]) for r in report.rows)

    y_lo, y_hi = _span(values, floor_zero=True)
    x0, y0 = MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM
    x1, y1 = WIDTH - MARGIN_RIGHT, MARGIN_TOP

    def sy(y: float) -> float:
        return y0 - (y - y_lo) / (y_hi - y_lo) * (y0 - y1)

    parts = _y_ticks(y_lo, y_hi)
    n = len(values)
    slot = (x1 - x0) / n
    bar_w = slot * 0.6
    for i, (value, label) in enumerate(zip(values, labels)):
        bx = x0 + i * slot + (slot - bar_w) / 2.0
        top = sy(value)
        parts.append(
            f'<rect x="{_fmt(bx)}" y="{_fmt(top)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(sy(y_lo) - top)}" fill="{PALETTE[0]}"/>'
        )
        parts.append(
            f'<text x="{_fmt(bx + bar_w / 2.0)}" y="{y0 + 16}" text-anchor="middle" '
            f'font-size="10">{label}</text>'
        )
        parts.append(
            f'<text x="{_fmt(bx + bar_w / 2.0)}" y="{_fmt(top - 4)}" '
            f'text-anchor="middle" font-size="10">{_fmt(value)}</text>'
        )
    return parts


def emit_svg(report: ExperimentReport, kind: str | None = None) -> str:
    """Render a report as deterministic standalone SVG text.

    ``kind`` is "line" or "bar"; by default the report's own chart hint is
    used. An empty report is an input error.
    """
    if not report.rows:
        raise ValueError("cannot chart an empty report")
    chart = kind if kind is not None else report.chart
    if chart not in ("line", "bar"):
        raise ValueError(f"unknown chart kind '{chart}'")

    body = _axes(report.experiment, report.x_key, report.y_key)
    if chart == "line":
        body += _emit_line(report)
    else:
        body += _emit_bar(report)

    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"
