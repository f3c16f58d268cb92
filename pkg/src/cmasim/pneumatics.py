"""Supply chain model: regulator, on/off valve, tubing, actuator chamber.

Each chamber fills and vents through the same tube, modelled as a first-order
lag with time constant tau = R * C, where R is the laminar (Hagen-Poiseuille)
tube resistance and C = V / p_atm the isothermal chamber compliance.
Pressures are gauge kPa throughout (atmosphere = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ATMOSPHERIC_PRESSURE_KPA = 101.325

# Events within this many seconds of a sample time take effect at that sample.
_TIME_EPS_S = 1e-12


@dataclass(frozen=True)
class PneumaticLine:
    """One regulator-to-chamber air path with its derived time constants.

    ``time_constant_fill_s``/``time_constant_vent_s`` are computed from the
    tube and chamber when left as None; pass explicit values to override
    (venting defaults to the fill constant since both flows share the tube).
    """

    supply_kpa: float = 10.0
    tube_inner_diameter_mm: float = 2.0
    tube_length_m: float = 2.0
    chamber_volume_ml: float = 10.0
    vent_kpa: float = 0.0
    air_viscosity_pa_s: float = 1.81e-5
    time_constant_fill_s: float | None = None
    time_constant_vent_s: float | None = None

    def __post_init__(self):
        if self.supply_kpa < 0.0:
            raise ValueError("supply pressure cannot be negative")
        if self.tube_inner_diameter_mm <= 0.0 or self.tube_length_m <= 0.0:
            raise ValueError("tube dimensions must be positive")
        if self.chamber_volume_ml <= 0.0:
            raise ValueError("chamber volume must be positive")
        if self.vent_kpa < 0.0 or self.vent_kpa > self.supply_kpa:
            raise ValueError("vent pressure must lie in [0, supply]")
        if self.air_viscosity_pa_s <= 0.0:
            raise ValueError("air viscosity must be positive")
        if self.time_constant_fill_s is None:
            compliance_m3_per_pa = (
                self.chamber_volume_ml * 1e-6 / (ATMOSPHERIC_PRESSURE_KPA * 1e3)
            )
            tau = tube_resistance(self) * compliance_m3_per_pa
            object.__setattr__(self, "time_constant_fill_s", tau)
        if self.time_constant_vent_s is None:
            object.__setattr__(self, "time_constant_vent_s", self.time_constant_fill_s)
        if self.time_constant_fill_s <= 0.0 or self.time_constant_vent_s <= 0.0:
            raise ValueError("time constants must be positive")

    @property
    def min_time_constant_s(self) -> float:
        return min(self.time_constant_fill_s, self.time_constant_vent_s)


@dataclass(frozen=True)
class ChamberState:
    """Instantaneous chamber condition."""

    pressure_kpa: float = 0.0
    valve_open: bool = False

    def __post_init__(self):
        if self.pressure_kpa < 0.0:
            raise ValueError("gauge pressure cannot be negative")


def tube_resistance(line: PneumaticLine) -> float:
    """Laminar flow resistance of the tube, Pa*s/m^3 (8 mu L / pi r^4)."""
    r_m = line.tube_inner_diameter_mm / 2.0 * 1e-3
    return 8.0 * line.air_viscosity_pa_s * line.tube_length_m / (math.pi * r_m**4)


def max_stable_dt_s(line: PneumaticLine) -> float:
    """Largest integration step the explicit update accepts for this line."""
    return 0.2 * line.min_time_constant_s


def chamber_step(state: ChamberState, line: PneumaticLine, dt_s: float) -> ChamberState:
    """Advance the chamber pressure one explicit Euler step.

    The pressure relaxes toward the supply (valve open) or the vent (valve
    closed) with the corresponding time constant, clamped to [0, supply].
    """
    if dt_s <= 0.0:
        raise ValueError("dt must be positive")
    if dt_s > max_stable_dt_s(line):
        raise ValueError(
            f"dt {dt_s} s exceeds stability bound 0.2*tau = {max_stable_dt_s(line):.6g} s"
        )
    if state.valve_open:
        target, tau = line.supply_kpa, line.time_constant_fill_s
    else:
        target, tau = line.vent_kpa, line.time_constant_vent_s
    pressure = state.pressure_kpa + dt_s * (target - state.pressure_kpa) / tau
    pressure = min(max(pressure, 0.0), line.supply_kpa)
    return ChamberState(pressure_kpa=pressure, valve_open=state.valve_open)


def simulate_chamber_trace(
    line: PneumaticLine,
    valve_timeline: list[tuple[float, bool]],
    horizon_s: float,
    dt_s: float,
) -> np.ndarray:
    """Fixed-step pressure trace for a valve open/close event list.

    Sample k holds the pressure at time k*dt; the trace has
    ceil(horizon/dt) + 1 samples and starts at 0 gauge. The timeline must be
    sorted by time; the valve is closed before the first event.
    """
    if horizon_s <= 0.0:
        raise ValueError("horizon must be positive")
    times = [t for t, _ in valve_timeline]
    if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError("valve timeline must be sorted by time")

    n_steps = math.ceil(horizon_s / dt_s)
    trace = np.empty(n_steps + 1, dtype=np.float64)
    state = ChamberState(pressure_kpa=0.0, valve_open=False)
    next_event = 0
    for k in range(n_steps + 1):
        t = k * dt_s
        while next_event < len(valve_timeline) and (
            valve_timeline[next_event][0] <= t + _TIME_EPS_S
        ):
            state = ChamberState(
                pressure_kpa=state.pressure_kpa,
                valve_open=valve_timeline[next_event][1],
            )
            next_event += 1
        trace[k] = state.pressure_kpa
        if k < n_steps:
            state = chamber_step(state, line, dt_s)
    return trace
