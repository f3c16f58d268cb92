"""Command-line interface.

Subcommands:
  sim run       --config FILE --experiment {sweep|pressure|patterns|scenario}
                --out DIR [--svg]
  sim calibrate --config FILE --targets FILE --out DIR
  sim validate  --config FILE

Exit codes: 0 success, 1 validation/input error, 2 runtime error
(incomplete simulation or failed calibration).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import __version__
from .config import (
    ScenarioConfig,
    build_scenario,
    config_hash,
    parse_config,
    serialize_config,
    with_transport,
)
from .errors import CalibrationError, ConfigError
from .experiments import (
    EXPERIMENTS,
    exp_scenario,
    format_number,
    run_experiment,
    write_report_csv,
)
from .sequencer import PatternKind, PatternSpec
from .transport import calibrate_transport, simulated_velocities

_TARGET_COLUMNS = ("pattern", "t_on_s", "velocity_gps")


def _load_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return parse_config("{}")
    return parse_config(Path(path).read_text(encoding="utf-8"))


def load_targets(
    path: str | Path,
    t_off_s: float = 1.0,
    n_cycles: int = 6,
) -> list[tuple[PatternSpec, float]]:
    """Read calibration targets from a pattern,t_on_s,velocity_gps CSV.

    ``t_off_s`` and ``n_cycles`` complete each row's pattern; pass the values
    the experiment runs will use so the fit optimises the same schedules.
    """
    targets = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _TARGET_COLUMNS:
            raise ValueError(
                f"targets CSV must have columns {','.join(_TARGET_COLUMNS)}"
            )
        for record in reader:
            kind = PatternKind(record["pattern"])
            if kind is PatternKind.CUSTOM:
                raise ValueError("calibration targets must use pattern1 or pattern2")
            targets.append(
                (
                    PatternSpec(
                        kind=kind,
                        t_on_s=float(record["t_on_s"]),
                        t_off_s=t_off_s,
                        n_cycles=n_cycles,
                    ),
                    float(record["velocity_gps"]),
                )
            )
    return targets


def _write_manifest(
    out_dir: Path,
    command: str,
    config: ScenarioConfig,
    outputs: list[str],
    elapsed_s: float,
) -> None:
    manifest = {
        "command": command,
        "config_sha256": config_hash(config),
        "version": __version__,
        "outputs": sorted(outputs),
        "elapsed_s": round(elapsed_s, 3),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _cmd_run(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = _load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.experiment == "scenario":
        report, result = exp_scenario(config)
        incomplete = result.incomplete
    else:
        report = run_experiment(args.experiment, config)
        incomplete = args.experiment == "patterns" and any(
            row[report.column_index("incomplete")] for row in report.rows
        )

    outputs = [f"{report.experiment}.csv", f"{report.experiment}.png"]
    write_report_csv(report, out_dir / f"{report.experiment}.csv")

    from .figures import save_report_figure

    save_report_figure(report, out_dir / f"{report.experiment}.png")

    if args.svg:
        from .charts import emit_svg

        (out_dir / f"{report.experiment}.svg").write_text(
            emit_svg(report), encoding="utf-8"
        )
        outputs.append(f"{report.experiment}.svg")

    _write_manifest(out_dir, "run", config, outputs, time.perf_counter() - started)

    if incomplete:
        print(
            "warning: run finished with beads still in the lumen (incomplete)",
            file=sys.stderr,
        )
        return 2
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    config = _load_config(args.config)
    targets = load_targets(
        args.targets,
        t_off_s=config.pattern.t_off_s,
        n_cycles=config.pattern.n_cycles,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    template = build_scenario(config)
    fitted = calibrate_transport(targets, template, init=config.transport)
    fitted_config = with_transport(config, fitted)

    velocities = simulated_velocities(
        [pattern for pattern, _ in targets], template, fitted
    )
    rows = [
        (pattern.kind.value, pattern.t_on_s, measured, simulated)
        for (pattern, measured), simulated in zip(targets, velocities)
    ]

    (out_dir / "calibrated_config.json").write_text(
        json.dumps(serialize_config(fitted_config), indent=2) + "\n",
        encoding="utf-8",
    )
    with open(out_dir / "calibration_report.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("pattern", "t_on_s", "target_gps", "fitted_gps"))
        for row in rows:
            writer.writerow([format_number(v) for v in row])

    _write_manifest(
        out_dir,
        "calibrate",
        fitted_config,
        ["calibrated_config.json", "calibration_report.csv"],
        time.perf_counter() - started,
    )
    print(
        f"fitted p_fric={format_number(fitted.p_fric_kpa)} kPa, "
        f"mobility={format_number(fitted.mobility_mm_per_kpa_s)} mm/s/kPa"
    )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    _load_config(args.config)
    print("configuration OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sim",
        description="Simulate ring-actuator peristalsis on the soft rectum model.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write its report")
    run.add_argument("--config", help="JSON configuration file (defaults when omitted)")
    run.add_argument("--experiment", required=True, choices=EXPERIMENTS)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--svg", action="store_true", help="also emit a deterministic SVG chart")
    run.set_defaults(func=_cmd_run)

    cal = sub.add_parser("calibrate", help="fit transport parameters to measured velocities")
    cal.add_argument("--config", help="JSON configuration file (defaults when omitted)")
    cal.add_argument("--targets", required=True, help="CSV of measured pattern velocities")
    cal.add_argument("--out", required=True, help="output directory")
    cal.set_defaults(func=_cmd_calibrate)

    val = sub.add_parser("validate", help="check a configuration file")
    val.add_argument("--config", help="JSON configuration file (defaults when omitted)")
    val.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CalibrationError as exc:
        print(f"calibration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
