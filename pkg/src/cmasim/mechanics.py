"""Quasi-static ring response: chamber pressure to bore contraction and lumen pressure.

The contraction ratio follows a saturating power law
``min(1, (p / p_close)^gamma)`` per cover type, and the radial pressure a ring
exerts on its contents is ``kappa(cover) * eta(label) * p``. The coefficient
defaults are placeholders that honour the measured orderings (rigid-framed
rings squeeze hardest, the narrow A1 ring transfers the most pressure); refit
them from a measurement table for quantitative work.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CalibrationError
from .geometry import Cover, Label

DEFAULT_P_CLOSE_KPA = {Cover.TYPE_I: 20.0, Cover.TYPE_II: 19.0, Cover.TYPE_III: 18.0}
DEFAULT_GAMMA = {Cover.TYPE_I: 2.0, Cover.TYPE_II: 2.0, Cover.TYPE_III: 2.0}
DEFAULT_KAPPA = {Cover.TYPE_I: 0.5, Cover.TYPE_II: 0.65, Cover.TYPE_III: 0.8}
DEFAULT_ETA = {Label.A1: 1.2, Label.A2: 1.0, Label.A3: 1.0}

_MEASUREMENT_COLUMNS = ("cover", "label", "p_in_kPa", "ratio", "gen_kPa")


@dataclass(frozen=True)
class ResponseParams:
    """Calibratable response coefficients, keyed by cover type and ring label."""

    p_close_kpa: dict[Cover, float] = field(
        default_factory=lambda: dict(DEFAULT_P_CLOSE_KPA)
    )
    gamma: dict[Cover, float] = field(default_factory=lambda: dict(DEFAULT_GAMMA))
    kappa: dict[Cover, float] = field(default_factory=lambda: dict(DEFAULT_KAPPA))
    eta: dict[Label, float] = field(default_factory=lambda: dict(DEFAULT_ETA))

    def __post_init__(self):
        for mapping, keys, name in (
            (self.p_close_kpa, Cover, "p_close_kpa"),
            (self.gamma, Cover, "gamma"),
            (self.kappa, Cover, "kappa"),
            (self.eta, Label, "eta"),
        ):
            missing = [k.value for k in keys if k not in mapping]
            if missing:
                raise ValueError(f"{name} missing entries for {missing}")
        if any(v <= 0.0 for v in self.p_close_kpa.values()):
            raise ValueError("p_close values must be positive")
        if any(v <= 0.0 for v in self.gamma.values()):
            raise ValueError("gamma values must be positive")
        if any(not 0.0 < v <= 1.0 for v in self.kappa.values()):
            raise ValueError("kappa values must lie in (0, 1]")
        if any(v <= 0.0 for v in self.eta.values()):
            raise ValueError("eta values must be positive")
        k = self.kappa
        if not k[Cover.TYPE_III] > k[Cover.TYPE_II] > k[Cover.TYPE_I]:
            raise ValueError("kappa ordering must be TypeIII > TypeII > TypeI")
        p = self.p_close_kpa
        if not (
            p[Cover.TYPE_III] <= p[Cover.TYPE_II] <= p[Cover.TYPE_I] <= 20.0
        ):
            raise ValueError(
                "p_close ordering must be TypeIII <= TypeII <= TypeI <= 20 kPa"
            )
        e = self.eta
        if not (e[Label.A1] > e[Label.A2] and e[Label.A2] == e[Label.A3]):
            raise ValueError("eta ordering must be A1 > A2 = A3")


@dataclass(frozen=True)
class MeasurementRow:
    """One observed operating point; either observation may be absent."""

    cover: Cover
    label: Label
    p_in_kpa: float
    ratio: float | None = None
    gen_kpa: float | None = None

    def __post_init__(self):
        if self.p_in_kpa < 0.0:
            raise ValueError("input pressure cannot be negative")
        if self.ratio is not None and not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"contraction ratio {self.ratio} outside [0, 1]")
        if self.gen_kpa is not None and self.gen_kpa < 0.0:
            raise ValueError("generated pressure cannot be negative")


@dataclass(frozen=True)
class MeasurementTable:
    rows: tuple[MeasurementRow, ...]

    @classmethod
    def from_csv(cls, path: str | Path) -> "MeasurementTable":
        """Load rows from a CSV with columns cover,label,p_in_kPa,ratio,gen_kPa."""
        rows = []
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or tuple(reader.fieldnames) != _MEASUREMENT_COLUMNS:
                raise ValueError(
                    f"measurement CSV must have columns {','.join(_MEASUREMENT_COLUMNS)}"
                )
            for record in reader:
                rows.append(
                    MeasurementRow(
                        cover=Cover(record["cover"]),
                        label=Label(record["label"]),
                        p_in_kpa=float(record["p_in_kPa"]),
                        ratio=float(record["ratio"]) if record["ratio"] else None,
                        gen_kpa=float(record["gen_kPa"]) if record["gen_kPa"] else None,
                    )
                )
        return cls(rows=tuple(rows))


def contraction_response(params: ResponseParams, cover: Cover, p_chamber_kpa: float) -> float:
    """Bore area contraction ratio at the given chamber pressure, in [0, 1]."""
    if p_chamber_kpa < 0.0:
        raise ValueError("chamber pressure cannot be negative")
    x = (p_chamber_kpa / params.p_close_kpa[cover]) ** params.gamma[cover]
    return min(1.0, x)


def generated_pressure(
    params: ResponseParams, cover: Cover, label: Label, p_chamber_kpa: float
) -> float:
    """Radial pressure (kPa) the ring exerts on contents inside its bore."""
    if p_chamber_kpa < 0.0:
        raise ValueError("chamber pressure cannot be negative")
    return params.kappa[cover] * params.eta[label] * p_chamber_kpa


def _prediction_error(params: ResponseParams, table: MeasurementTable) -> float:
    total = 0.0
    for row in table.rows:
        if row.ratio is not None:
            r = contraction_response(params, row.cover, row.p_in_kpa)
            total += (r - row.ratio) ** 2
        if row.gen_kpa is not None:
            g = generated_pressure(params, row.cover, row.label, row.p_in_kpa)
            total += (g - row.gen_kpa) ** 2
    return total


def _params_from_vector(vec: dict) -> ResponseParams | None:
    try:
        return ResponseParams(
            p_close_kpa={c: vec[("p_close", c)] for c in Cover},
            gamma={c: vec[("gamma", c)] for c in Cover},
            kappa={c: vec[("kappa", c)] for c in Cover},
            eta={
                Label.A1: vec[("eta", "A1")],
                Label.A2: vec[("eta", "A23")],
                Label.A3: vec[("eta", "A23")],
            },
        )
    except ValueError:
        return None


def calibrate_response(
    table: MeasurementTable,
    init: ResponseParams,
    freeze: tuple[str, ...] = (),
    n_sweeps: int = 80,
    shrink: float = 0.7,
) -> ResponseParams:
    """Fit response coefficients to a measurement table.

    Runs coordinate descent on a shrinking grid: each sweep perturbs every
    fitted coefficient in a fixed order by +-step and +-step/2, keeps strict
    improvements of the squared prediction error, then shrinks all steps.
    Only coefficients the table informs are swept (contraction rows drive
    p_close/gamma of their cover, pressure rows drive kappa/eta); coefficient
    families listed in ``freeze`` are held at their initial values. The
    ordering constraints on the parameters are enforced as hard constraints,
    and the final error never exceeds the initial one.
    """
    if not table.rows:
        raise ValueError("measurement table is empty")

    ratio_covers = {r.cover for r in table.rows if r.ratio is not None}
    gen_covers = {r.cover for r in table.rows if r.gen_kpa is not None}
    gen_labels = {r.label for r in table.rows if r.gen_kpa is not None}

    vec = {}
    for c in Cover:
        vec[("p_close", c)] = init.p_close_kpa[c]
        vec[("gamma", c)] = init.gamma[c]
        vec[("kappa", c)] = init.kappa[c]
    vec[("eta", "A1")] = init.eta[Label.A1]
    vec[("eta", "A23")] = init.eta[Label.A2]

    steps = {}
    for c in Cover:
        if "p_close" not in freeze and c in ratio_covers:
            steps[("p_close", c)] = 2.0
        if "gamma" not in freeze and c in ratio_covers:
            steps[("gamma", c)] = 0.5
        if "kappa" not in freeze and c in gen_covers:
            steps[("kappa", c)] = 0.1
    if "eta" not in freeze and Label.A1 in gen_labels:
        steps[("eta", "A1")] = 0.2
    if "eta" not in freeze and gen_labels & {Label.A2, Label.A3}:
        steps[("eta", "A23")] = 0.2

    current = _params_from_vector(vec)
    if current is None:
        raise CalibrationError("initial parameters violate the ordering constraints")
    best_err = _prediction_error(current, table)

    sweep_order = sorted(steps.keys(), key=lambda k: (k[0], str(k[1])))
    for _ in range(n_sweeps):
        for key in sweep_order:
            s = steps[key]
            base = vec[key]
            for candidate in (base - s, base - s / 2.0, base + s / 2.0, base + s):
                if candidate <= 0.0:
                    continue
                vec[key] = candidate
                trial = _params_from_vector(vec)
                if trial is None:
                    continue
                err = _prediction_error(trial, table)
                if err < best_err:
                    best_err = err
                    base = candidate
            vec[key] = base
        for key in steps:
            steps[key] *= shrink

    fitted = _params_from_vector(vec)
    assert fitted is not None
    return fitted
