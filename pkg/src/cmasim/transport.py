"""1-D quasi-static bead transport along the lumen under ring actuation.

Beads obey a stick-slip law: a bead moves only while some sufficiently
contracted ring drives it (span overlapping the bead or just behind its
rear), at a velocity proportional to the drive pressure in excess of a
static friction threshold. A nearly closed ring ahead seals the lumen and
stops the bead. Runs are deterministic; identical scenes give identical
results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from math import fsum

import numpy as np

from . import _kernel
from .errors import CalibrationError
from .geometry import ActuatorSpec, BeadSpec, Label, RectumSpec, validate_actuator_in_rectum
from .mechanics import ResponseParams
from .pneumatics import PneumaticLine, max_stable_dt_s
from .sequencer import PatternSpec, ValveSchedule, compile_pattern

# A run may outlast its schedule by at most this factor before being cut off.
RUNAWAY_CAP_FACTOR = 10


@dataclass(frozen=True)
class TransportParams:
    """Stick-slip transport coefficients and the integration step.

    The friction threshold and mobility ship pre-calibrated to the packaged
    reference velocities; ``sim calibrate`` refits them.
    """

    p_fric_kpa: float = 3.0
    mobility_mm_per_kpa_s: float = 6.0
    o_push: float = 0.24
    o_block: float = 0.3
    dt_s: float = 1e-3

    def __post_init__(self):
        if self.p_fric_kpa <= 0.0 or self.mobility_mm_per_kpa_s <= 0.0:
            raise ValueError("friction threshold and mobility must be positive")
        if not 0.0 < self.o_push <= self.o_block <= 1.0:
            raise ValueError("need 0 < o_push <= o_block <= 1")
        if self.dt_s <= 0.0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class Scenario:
    """Complete immutable description of one simulation run."""

    rectum: RectumSpec
    actuators: tuple[ActuatorSpec, ...]
    response: ResponseParams
    lines: dict[Label, PneumaticLine]
    schedule: ValveSchedule
    beads: tuple[BeadSpec, ...]
    transport: TransportParams
    instant_pneumatics: bool = False

    def __post_init__(self):
        if not self.actuators:
            raise ValueError("scenario needs at least one actuator")
        labels = [a.label for a in self.actuators]
        if len(set(labels)) != len(labels):
            raise ValueError("actuator labels must be unique")
        for actuator in self.actuators:
            validate_actuator_in_rectum(actuator, self.rectum)
            if actuator.label not in self.lines:
                raise ValueError(f"no pneumatic line for ring {actuator.label.value}")
        _check_beads(self.beads, self.rectum)
        if not self.instant_pneumatics:
            bound = min(
                max_stable_dt_s(self.lines[a.label]) for a in self.actuators
            )
            if self.transport.dt_s > bound:
                raise ValueError(
                    f"transport dt {self.transport.dt_s} s exceeds the pneumatic "
                    f"stability bound {bound:.6g} s (0.2 * smallest time constant)"
                )


@dataclass(frozen=True)
class SimResult:
    """Recorded time series plus run summary.

    ``positions_mm[k, i]`` is NaN once bead i has been expelled. Expelled
    masses are exactly-rounded sums (math.fsum) over the expelled bead set,
    so expelled plus in-lumen mass always reproduces the initial mass.
    """

    times_s: np.ndarray
    pressures_kpa: np.ndarray
    occlusions: np.ndarray
    positions_mm: np.ndarray
    expelled_mass_g: np.ndarray
    labels: tuple[Label, ...]
    bead_masses_g: tuple[float, ...]
    expelled_total_g: float
    defecation_velocity_gps: float
    makespan_s: float
    incomplete: bool
    t_first_open_s: float | None
    t_last_expulsion_s: float | None


def _check_beads(beads: tuple[BeadSpec, ...], rectum: RectumSpec) -> None:
    prev_front = -math.inf
    prev_rear = -math.inf
    for bead in beads:
        if bead.position_mm < 0.0 or bead.front_mm > rectum.length_mm:
            raise ValueError(
                f"bead at {bead.position_mm} mm lies outside the lumen"
            )
        if bead.position_mm < prev_rear:
            raise ValueError("beads must be ordered by position")
        if bead.position_mm < prev_front - 1e-12:
            raise ValueError(
                f"bead at {bead.position_mm} mm overlaps the one behind it"
            )
        prev_front = bead.front_mm
        prev_rear = bead.position_mm


def occlusion_profile(
    actuators: tuple[ActuatorSpec, ...],
    ratios: dict[Label, float],
    grid: list[tuple[float, float]],
) -> list[float]:
    """Map ring contraction ratios onto the axial cell grid.

    A cell takes the ratio of the ring whose span covers its midpoint;
    overlapping spans take the maximum, uncovered cells are 0.
    """
    for label, ratio in ratios.items():
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"ratio for {label.value} outside [0, 1]")
    profile = []
    for lo, hi in grid:
        mid = (lo + hi) / 2.0
        occ = 0.0
        for actuator in actuators:
            span_lo, span_hi = actuator.span_mm
            if span_lo <= mid <= span_hi:
                occ = max(occ, ratios[actuator.label])
        profile.append(occ)
    return profile


def bolus_step(
    beads: tuple[BeadSpec, ...],
    actuators: tuple[ActuatorSpec, ...],
    ratios: dict[Label, float],
    gens_kpa: dict[Label, float],
    params: TransportParams,
    dt_s: float,
    rectum: RectumSpec,
) -> tuple[tuple[BeadSpec, ...], tuple[BeadSpec, ...]]:
    """Advance every bead one step; returns (still in lumen, expelled).

    Beads are updated distal-first so the clamp against the bead ahead is
    resolved in a single deterministic pass.
    """
    _check_beads(beads, rectum)
    if dt_s <= 0.0:
        raise ValueError("dt must be positive")

    spans = {a.label: a.span_mm for a in actuators}
    updated: list[BeadSpec] = []
    expelled: list[BeadSpec] = []
    ahead_rear = math.inf
    for bead in reversed(beads):
        rear = bead.position_mm
        front = bead.front_mm

        drive = 0.0
        driving: Label | None = None
        for actuator in actuators:
            label = actuator.label
            if ratios[label] < params.o_push or gens_kpa[label] <= drive:
                continue
            span_lo, span_hi = spans[label]
            overlaps = span_lo < front and span_hi > rear
            behind = span_hi <= rear and rear - span_hi <= bead.length_mm
            if overlaps or behind:
                drive = gens_kpa[label]
                driving = label

        velocity = 0.0
        if driving is not None:
            blocked = any(
                a.label != driving
                and ratios[a.label] >= params.o_block
                and spans[a.label][0] >= front
                for a in actuators
            )
            if not blocked:
                velocity = params.mobility_mm_per_kpa_s * max(
                    0.0, drive - params.p_fric_kpa
                )

        new_rear = rear + velocity * dt_s
        if new_rear + bead.length_mm > ahead_rear:
            new_rear = ahead_rear - bead.length_mm
        moved = replace(bead, position_mm=new_rear)
        if new_rear >= rectum.length_mm:
            expelled.append(moved)
        else:
            updated.append(moved)
            ahead_rear = new_rear

    updated.reverse()
    expelled.reverse()
    return tuple(updated), tuple(expelled)


def _compile_events(
    schedule: ValveSchedule, labels: tuple[Label, ...]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_events = max((len(schedule.events[label]) for label in labels), default=0)
    ev_t = np.full((len(labels), max(n_events, 1)), np.inf, dtype=np.float64)
    ev_open = np.zeros((len(labels), max(n_events, 1)), dtype=np.int8)
    ev_n = np.zeros(len(labels), dtype=np.int64)
    for idx, label in enumerate(labels):
        events = schedule.events[label]
        ev_n[idx] = len(events)
        for j, (t, state) in enumerate(events):
            ev_t[idx, j] = t
            ev_open[idx, j] = 1 if state else 0
    return ev_t, ev_open, ev_n


def run_scenario(scene: Scenario, record_every: int = 1) -> SimResult:
    """Integrate one scenario to completion.

    The loop runs to the later of the schedule end and the last expulsion.
    Once the schedule is over and no ring can drive a bead any more (all
    occlusions below o_push with every valve shut), the run stops and is
    flagged incomplete; a hard cap of ten schedule durations applies either
    way. Samples are recorded every ``record_every`` steps plus the final
    state.
    """
    if scene.schedule.total_duration_s <= 0.0:
        raise ValueError("schedule duration must be positive")
    if not scene.beads:
        raise ValueError("scenario needs at least one bead")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    dt = scene.transport.dt_s
    labels = tuple(a.label for a in scene.actuators)
    n_act = len(labels)
    n_beads = len(scene.beads)

    n_sched = math.ceil(scene.schedule.total_duration_s / dt - 1e-9)
    n_cap = RUNAWAY_CAP_FACTOR * n_sched

    ev_t, ev_open, ev_n = _compile_events(scene.schedule, labels)

    tau_fill = np.empty(n_act)
    tau_vent = np.empty(n_act)
    supply = np.empty(n_act)
    vent = np.empty(n_act)
    span_lo = np.empty(n_act)
    span_hi = np.empty(n_act)
    inv_p_close = np.empty(n_act)
    gamma = np.empty(n_act)
    gen_coef = np.empty(n_act)
    for idx, actuator in enumerate(scene.actuators):
        line = scene.lines[actuator.label]
        tau_fill[idx] = line.time_constant_fill_s
        tau_vent[idx] = line.time_constant_vent_s
        supply[idx] = line.supply_kpa
        vent[idx] = line.vent_kpa
        span_lo[idx], span_hi[idx] = actuator.span_mm
        inv_p_close[idx] = 1.0 / scene.response.p_close_kpa[actuator.cover]
        gamma[idx] = scene.response.gamma[actuator.cover]
        gen_coef[idx] = (
            scene.response.kappa[actuator.cover] * scene.response.eta[actuator.label]
        )

    pos = np.array([b.position_mm for b in scene.beads], dtype=np.float64)
    bead_len = np.array([b.length_mm for b in scene.beads], dtype=np.float64)
    masses = tuple(b.mass_g for b in scene.beads)

    max_rec = n_cap // record_every + 2
    rec_step = np.zeros(max_rec, dtype=np.int64)
    rec_p = np.zeros((max_rec, n_act), dtype=np.float64)
    rec_occ = np.zeros((max_rec, n_act), dtype=np.float64)
    rec_pos = np.zeros((max_rec, n_beads), dtype=np.float64)
    expelled_step = np.full(n_beads, -1, dtype=np.int64)

    n_rec, end_step, capped = _kernel.step_loop(
        dt,
        n_sched,
        n_cap,
        scene.instant_pneumatics,
        ev_t,
        ev_open,
        ev_n,
        tau_fill,
        tau_vent,
        supply,
        vent,
        span_lo,
        span_hi,
        inv_p_close,
        gamma,
        gen_coef,
        scene.transport.o_push,
        scene.transport.o_block,
        scene.transport.p_fric_kpa,
        scene.transport.mobility_mm_per_kpa_s,
        pos,
        bead_len,
        scene.rectum.length_mm,
        record_every,
        rec_step,
        rec_p,
        rec_occ,
        rec_pos,
        expelled_step,
    )

    steps = rec_step[:n_rec]
    expelled_mass = np.array(
        [
            fsum(
                masses[i]
                for i in range(n_beads)
                if 0 <= expelled_step[i] <= step
            )
            for step in steps
        ]
    )

    expelled_idx = [i for i in range(n_beads) if expelled_step[i] >= 0]
    expelled_total = fsum(masses[i] for i in expelled_idx)
    t_last = max((expelled_step[i] for i in expelled_idx), default=None)
    t_last_s = float(t_last * dt) if t_last is not None else None
    t_first_open = scene.schedule.first_open_time_s()
    incomplete = len(expelled_idx) < n_beads or bool(capped)

    result = SimResult(
        times_s=steps.astype(np.float64) * dt,
        pressures_kpa=rec_p[:n_rec].copy(),
        occlusions=rec_occ[:n_rec].copy(),
        positions_mm=rec_pos[:n_rec].copy(),
        expelled_mass_g=expelled_mass,
        labels=labels,
        bead_masses_g=masses,
        expelled_total_g=expelled_total,
        defecation_velocity_gps=0.0,
        makespan_s=end_step * dt,
        incomplete=incomplete,
        t_first_open_s=t_first_open,
        t_last_expulsion_s=t_last_s,
    )
    return replace(result, defecation_velocity_gps=defecation_velocity(result))


def defecation_velocity(result: SimResult) -> float:
    """Expelled mass over the span from first valve opening to last expulsion."""
    if (
        result.expelled_total_g <= 0.0
        or result.t_last_expulsion_s is None
        or result.t_first_open_s is None
    ):
        return 0.0
    elapsed = result.t_last_expulsion_s - result.t_first_open_s
    if elapsed <= 0.0:
        return 0.0
    return result.expelled_total_g / elapsed


def simulated_velocities(
    patterns: list[PatternSpec],
    template: Scenario,
    transport: TransportParams,
) -> list[float]:
    """Defecation velocity for each pattern on the template scene."""
    velocities = []
    for pattern in patterns:
        scene = replace(
            template,
            schedule=compile_pattern(pattern),
            transport=transport,
        )
        result = run_scenario(scene, record_every=1000)
        velocities.append(result.defecation_velocity_gps)
    return velocities


def calibrate_transport(
    targets: list[tuple[PatternSpec, float]],
    template: Scenario,
    init: TransportParams | None = None,
    n_sweeps: int = 12,
    shrink: float = 0.65,
) -> TransportParams:
    """Fit (p_fric, mobility) so simulated velocities match measured ones.

    Deterministic coordinate descent on a shrinking grid: each sweep tries
    +-step and +-step/2 around the current value, mobility first then the
    friction threshold, keeping strict improvements of the summed squared
    velocity error. Raises CalibrationError when every evaluated candidate
    produces all-zero velocities (the model cannot reach the regime).
    """
    if len(targets) < 2:
        raise ValueError("need at least two calibration targets")
    base = init if init is not None else template.transport
    patterns = [pattern for pattern, _ in targets]
    measured = [v for _, v in targets]

    saw_motion = False

    def objective(p_fric: float, mobility: float) -> float:
        nonlocal saw_motion
        params = replace(
            base, p_fric_kpa=p_fric, mobility_mm_per_kpa_s=mobility
        )
        sim = simulated_velocities(patterns, template, params)
        if any(v > 0.0 for v in sim):
            saw_motion = True
        return fsum((s - m) ** 2 for s, m in zip(sim, measured))

    current = [base.p_fric_kpa, base.mobility_mm_per_kpa_s]
    steps = [0.5, 2.5]
    best = objective(*current)

    # Mobility (index 1) is the dominant knob; sweep it first.
    order = (1, 0)
    for sweep in range(n_sweeps):
        for idx in order:
            s = steps[idx]
            for candidate in (
                current[idx] - s,
                current[idx] - s / 2.0,
                current[idx] + s / 2.0,
                current[idx] + s,
            ):
                if candidate <= 0.0:
                    continue
                trial = current.copy()
                trial[idx] = candidate
                err = objective(*trial)
                if err < best:
                    best = err
                    current = trial
        steps = [s * shrink for s in steps]
        if sweep == 0 and not saw_motion:
            raise CalibrationError(
                "no candidate parameters produced any transport; the scene "
                "cannot reach the measured regime"
            )

    if not saw_motion:
        raise CalibrationError(
            "no candidate parameters produced any transport; the scene "
            "cannot reach the measured regime"
        )
    return replace(
        base, p_fric_kpa=current[0], mobility_mm_per_kpa_s=current[1]
    )
