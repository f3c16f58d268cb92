"""Matplotlib rendering of experiment reports to image files.

These figures accompany the CSV output of the report path; the byte-stable
chart format is the SVG emitter in :mod:`cmasim.charts`.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiments import ExperimentReport


def save_report_figure(report: ExperimentReport, path: str | Path) -> None:
    """Render a report to an image file (format from the extension)."""
    if not report.rows:
        raise ValueError("cannot plot an empty report")

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    yi = report.column_index(report.y_key)

    if report.chart == "line":
        xi = report.column_index(report.x_key)
        if report.group_key is not None:
            gi = report.column_index(report.group_key)
            groups: list = []
            for row in report.rows:
                if row[gi] not in groups:
                    groups.append(row[gi])
            for group in groups:
                pts = [(r[xi], r[yi]) for r in report.rows if r[gi] == group]
                ax.plot(*zip(*pts), marker="o", label=str(group))
            ax.legend()
        else:
            pts = [(r[xi], r[yi]) for r in report.rows]
            ax.plot(*zip(*pts), marker="o" if len(pts) <= 200 else None)
        ax.set_xlabel(report.x_key)
    else:
        labels = report.row_labels
        if labels is None:
            xi = report.column_index(report.x_key)
            labels = tuple(str(r[xi]) for r in report.rows)
        values = [float(r[yi]) for r in report.rows]
        ax.bar(range(len(values)), values, tick_label=list(labels))
        ax.tick_params(axis="x", labelrotation=20)
        for i, value in enumerate(values):
            ax.annotate(f"{value:.3g}", (i, value), ha="center", va="bottom")

    ax.set_ylabel(report.y_key)
    ax.set_title(report.experiment)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
