"""Lumped-parameter simulator of ring-shaped pneumatic muscle actuators
expelling simulated stool beads from a soft rectum model."""

__version__ = "0.1.0"

from .geometry import (
    ActuatorSpec,
    BeadSpec,
    Cover,
    Label,
    RectumSpec,
    bore_area,
    cell_grid,
    contraction_ratio,
    default_actuators,
    make_bead,
)
from .mechanics import (
    MeasurementRow,
    MeasurementTable,
    ResponseParams,
    calibrate_response,
    contraction_response,
    generated_pressure,
)
from .pneumatics import (
    ChamberState,
    PneumaticLine,
    chamber_step,
    simulate_chamber_trace,
    tube_resistance,
)
from .sequencer import (
    PatternKind,
    PatternSpec,
    ValveSchedule,
    build_pattern1,
    build_pattern2,
    compile_pattern,
    pattern1_literal,
    valve_state_at,
)
from .transport import (
    Scenario,
    SimResult,
    TransportParams,
    bolus_step,
    calibrate_transport,
    defecation_velocity,
    occlusion_profile,
    run_scenario,
)

__all__ = [
    "__version__",
    "ActuatorSpec",
    "BeadSpec",
    "ChamberState",
    "Cover",
    "Label",
    "MeasurementRow",
    "MeasurementTable",
    "PatternKind",
    "PatternSpec",
    "PneumaticLine",
    "RectumSpec",
    "ResponseParams",
    "Scenario",
    "SimResult",
    "TransportParams",
    "ValveSchedule",
    "bolus_step",
    "bore_area",
    "build_pattern1",
    "build_pattern2",
    "calibrate_response",
    "calibrate_transport",
    "cell_grid",
    "chamber_step",
    "compile_pattern",
    "contraction_ratio",
    "contraction_response",
    "default_actuators",
    "defecation_velocity",
    "generated_pressure",
    "make_bead",
    "occlusion_profile",
    "pattern1_literal",
    "run_scenario",
    "simulate_chamber_trace",
    "tube_resistance",
    "valve_state_at",
]
