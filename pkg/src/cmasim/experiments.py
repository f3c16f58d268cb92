"""Experiment runners producing tabular reports, and their CSV emission.

Reports carry a provenance block (configuration hash, package version) and
chart hints used by the SVG/figure emitters. All numeric CSV output is
formatted to six significant digits (round-half-even) with LF line endings,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from math import fsum, isnan
from pathlib import Path

from . import __version__
from .config import ScenarioConfig, build_scenario, config_hash
from .geometry import Cover, Label
from .mechanics import contraction_response, generated_pressure
from .sequencer import PatternKind, PatternSpec
from .transport import SimResult, run_scenario

EXPERIMENTS = ("sweep", "pressure", "patterns", "scenario")

# The four stock working patterns, in reporting order.
PATTERN_ROWS = (
    (PatternKind.PATTERN1, 1.0),
    (PatternKind.PATTERN2, 1.0),
    (PatternKind.PATTERN1, 2.0),
    (PatternKind.PATTERN1, 3.0),
)


@dataclass(frozen=True)
class ExperimentReport:
    """Named rows plus provenance and chart hints."""

    experiment: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    config_sha256: str
    version: str
    chart: str  # "line" or "bar"
    x_key: str
    y_key: str
    group_key: str | None = None
    row_labels: tuple[str, ...] | None = None

    def column_index(self, key: str) -> int:
        return self.columns.index(key)


def format_number(value) -> str:
    """Six significant digits, no negative zero, plain repr for ints."""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if isnan(value):
            return ""
        if value == 0.0:
            value = 0.0
        return f"{value:.6g}"
    return str(value)


def exp_contraction_sweep(config: ScenarioConfig) -> ExperimentReport:
    """Contraction ratio of each cover type over a 0-20 kPa pressure sweep."""
    rows = []
    for cover in Cover:
        for p in range(0, 21, 2):
            ratio = contraction_response(config.response, cover, float(p))
            rows.append((cover.value, float(p), ratio))
    return ExperimentReport(
        experiment="sweep",
        columns=("cover", "p_in_kPa", "ratio"),
        rows=tuple(rows),
        config_sha256=config_hash(config),
        version=__version__,
        chart="line",
        x_key="p_in_kPa",
        y_key="ratio",
        group_key="cover",
    )


def exp_generated_pressure(config: ScenarioConfig) -> ExperimentReport:
    """Generated lumen pressure per cover type and ring size at the supply level."""
    p_in = config.pneumatics.supply_kpa
    rows = []
    for cover in Cover:
        for label in (Label.A1, Label.A2):
            gen = generated_pressure(config.response, cover, label, p_in)
            rows.append((cover.value, label.value, gen))
    return ExperimentReport(
        experiment="pressure",
        columns=("cover", "label", "gen_kPa"),
        rows=tuple(rows),
        config_sha256=config_hash(config),
        version=__version__,
        chart="bar",
        x_key="label",
        y_key="gen_kPa",
        row_labels=tuple(f"{r[0]}/{r[1]}" for r in rows),
    )


def exp_patterns(config: ScenarioConfig) -> ExperimentReport:
    """Defecation velocity for the four stock working patterns."""
    rows = []
    for kind, t_on in PATTERN_ROWS:
        pattern = PatternSpec(
            kind=kind,
            t_on_s=t_on,
            t_off_s=config.pattern.t_off_s,
            n_cycles=config.pattern.n_cycles,
        )
        scene = build_scenario(config, pattern=pattern)
        result = run_scenario(scene, record_every=config.decimation)
        rows.append(
            (
                kind.value,
                t_on,
                result.defecation_velocity_gps,
                result.expelled_total_g,
                result.makespan_s,
                1 if result.incomplete else 0,
            )
        )
    return ExperimentReport(
        experiment="patterns",
        columns=(
            "pattern",
            "t_on_s",
            "velocity_gps",
            "expelled_g",
            "makespan_s",
            "incomplete",
        ),
        rows=tuple(rows),
        config_sha256=config_hash(config),
        version=__version__,
        chart="bar",
        x_key="pattern",
        y_key="velocity_gps",
        row_labels=tuple(f"{r[0]} t={format_number(r[1])}" for r in rows),
    )


def exp_scenario(config: ScenarioConfig) -> tuple[ExperimentReport, SimResult]:
    """Run the configured scenario and tabulate its recorded time series."""
    scene = build_scenario(config)
    result = run_scenario(scene, record_every=config.decimation)
    columns = (
        ("t_s",)
        + tuple(f"p_{label.value}_kPa" for label in result.labels)
        + tuple(f"occ_{label.value}" for label in result.labels)
        + tuple(f"bead_{i}_mm" for i in range(len(result.bead_masses_g)))
        + ("expelled_g", "incomplete")
    )
    incomplete = 1 if result.incomplete else 0
    rows = []
    for k in range(len(result.times_s)):
        rows.append(
            (float(result.times_s[k]),)
            + tuple(float(v) for v in result.pressures_kpa[k])
            + tuple(float(v) for v in result.occlusions[k])
            + tuple(float(v) for v in result.positions_mm[k])
            + (float(result.expelled_mass_g[k]), incomplete)
        )
    report = ExperimentReport(
        experiment="scenario",
        columns=columns,
        rows=tuple(rows),
        config_sha256=config_hash(config),
        version=__version__,
        chart="line",
        x_key="t_s",
        y_key="expelled_g",
    )
    return report, result


def run_experiment(name: str, config: ScenarioConfig) -> ExperimentReport:
    if name == "sweep":
        return exp_contraction_sweep(config)
    if name == "pressure":
        return exp_generated_pressure(config)
    if name == "patterns":
        return exp_patterns(config)
    if name == "scenario":
        return exp_scenario(config)[0]
    raise ValueError(f"unknown experiment '{name}' (choose from {EXPERIMENTS})")


def write_report_csv(report: ExperimentReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([format_number(v) for v in row])


def mass_conservation_defect(result: SimResult) -> float:
    """Largest deviation of expelled plus in-lumen mass from the initial mass.

    Masses are combined with math.fsum (exactly rounded), so a correct run
    reports a defect of exactly zero at every sample.
    """
    total = fsum(result.bead_masses_g)
    worst = 0.0
    for k in range(len(result.times_s)):
        in_lumen = [
            result.bead_masses_g[i]
            for i in range(len(result.bead_masses_g))
            if not isnan(result.positions_mm[k, i])
        ]
        expelled = [
            result.bead_masses_g[i]
            for i in range(len(result.bead_masses_g))
            if isnan(result.positions_mm[k, i])
        ]
        defect = abs(fsum(in_lumen + expelled) - total)
        worst = max(worst, defect)
        column_defect = abs(fsum(expelled) - float(result.expelled_mass_g[k]))
        worst = max(worst, column_defect)
    return worst


def reference_targets_path() -> Path:
    """Packaged CSV with the measured velocities of the four stock patterns."""
    return Path(resources.files("cmasim").joinpath("data/reference_targets.csv"))
