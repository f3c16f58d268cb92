"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``.
"""

import filecmp
import time
from dataclasses import replace

import numpy as np
import pytest

from cmasim.cli import load_targets, main
from cmasim.config import build_scenario, default_config
from cmasim.experiments import (
    exp_patterns,
    mass_conservation_defect,
    reference_targets_path,
)
from cmasim.geometry import (
    ActuatorSpec,
    BeadSpec,
    Cover,
    Label,
    RectumSpec,
)
from cmasim.mechanics import (
    MeasurementRow,
    MeasurementTable,
    ResponseParams,
    calibrate_response,
    contraction_response,
    generated_pressure,
)
from cmasim.pneumatics import PneumaticLine, simulate_chamber_trace
from cmasim.sequencer import PatternKind, PatternSpec, compile_pattern
from cmasim.transport import (
    Scenario,
    TransportParams,
    calibrate_transport,
    run_scenario,
    simulated_velocities,
)

TARGETS = (0.42, 0.17, 0.22, 0.11)  # pattern1 t=1, pattern2, pattern1 t=2, pattern1 t=3


@pytest.fixture(scope="module")
def stock_config():
    return default_config()


@pytest.fixture(scope="module")
def calibrated(stock_config):
    """Transport parameters fitted to the packaged reference velocities."""
    targets = load_targets(
        reference_targets_path(),
        t_off_s=stock_config.pattern.t_off_s,
        n_cycles=stock_config.pattern.n_cycles,
    )
    template = build_scenario(stock_config)
    started = time.perf_counter()
    fitted = calibrate_transport(targets, template, init=stock_config.transport)
    elapsed = time.perf_counter() - started
    return fitted, elapsed


def _report(criterion: int, name: str) -> None:
    print(f"ACCEPTANCE {criterion} ({name}): PASS")


def test_criterion_1_saturation_endpoints():
    params = ResponseParams()
    for cover in Cover:
        assert contraction_response(params, cover, 20.0) >= 0.95
        assert contraction_response(params, cover, 0.0) == 0.0
    _report(1, "saturation endpoints")


def test_criterion_2_pressure_ordering_argmax():
    params = ResponseParams()
    steps = int(20.0 / 0.5)
    for k in range(1, steps + 1):
        p = k * 0.5
        for label in Label:
            by_cover = {
                cover: generated_pressure(params, cover, label, p) for cover in Cover
            }
            assert by_cover[Cover.TYPE_III] > by_cover[Cover.TYPE_II] > by_cover[Cover.TYPE_I]
        for cover in Cover:
            assert generated_pressure(params, cover, Label.A1, p) > generated_pressure(
                params, cover, Label.A2, p
            )
    _report(2, "generated-pressure ordering")


def test_criterion_3_pattern_velocities_after_calibration(stock_config, calibrated):
    fitted, calibration_time = calibrated
    started = time.perf_counter()
    report = exp_patterns(replace(stock_config, transport=fitted))
    elapsed = calibration_time + (time.perf_counter() - started)

    velocities = [row[report.column_index("velocity_gps")] for row in report.rows]
    for simulated, target in zip(velocities, TARGETS):
        assert abs(simulated - target) <= 0.25 * target, (
            f"velocity {simulated:.4f} outside +-25% of {target}"
        )
    v1, v2, v3, v4 = velocities
    assert v1 > v3 > v2 > v4
    assert elapsed < 60.0
    _report(3, "four-pattern velocity reproduction")


def test_criterion_4_declining_hold_time_trend(stock_config, calibrated):
    fitted, _ = calibrated
    started = time.perf_counter()
    template = build_scenario(stock_config)
    velocities = simulated_velocities(
        [PatternSpec(PatternKind.PATTERN1, t, 1.0, n_cycles=6) for t in (1.0, 2.0, 3.0)],
        template,
        fitted,
    )
    assert velocities[0] > velocities[1] > velocities[2]
    assert time.perf_counter() - started < 30.0
    _report(4, "declining velocity with hold time")


def test_criterion_5_pneumatic_integrator_accuracy():
    tau = 0.05
    supply = 10.0
    line = PneumaticLine(
        supply_kpa=supply, time_constant_fill_s=tau, time_constant_vent_s=tau
    )
    dt = tau / 100
    trace = simulate_chamber_trace(line, [(0.0, True)], horizon_s=5 * tau, dt_s=dt)
    times = np.arange(len(trace)) * dt
    exact = supply * (1.0 - np.exp(-times / tau))
    assert np.max(np.abs(trace - exact)) <= 0.01 * supply
    _report(5, "integrator accuracy vs closed form")


def test_criterion_6_transport_oracle_equivalence():
    rectum = RectumSpec(length_mm=20.0, body_radius_mm=10.0, n_cells=3)
    ring = ActuatorSpec(Label.A1, Cover.TYPE_III, 27.0, 53.0, 15.0, 7.5)
    transport = TransportParams()
    scene = Scenario(
        rectum=rectum,
        actuators=(ring,),
        response=ResponseParams(),
        lines={Label.A1: PneumaticLine(supply_kpa=10.0)},
        schedule=compile_pattern(
            PatternSpec(
                kind=PatternKind.CUSTOM,
                custom_timeline=((0.0, Label.A1, True), (2.0, Label.A1, False)),
                custom_duration_s=2.5,
            )
        ),
        beads=(BeadSpec(length_mm=8.0, width_mm=6.0, mass_g=1.0, position_mm=1.0),),
        transport=transport,
        instant_pneumatics=True,
    )
    result = run_scenario(scene)
    drive = 0.8 * 1.2 * 10.0
    velocity = transport.mobility_mm_per_kpa_s * (drive - transport.p_fric_kpa)
    t_exact = (rectum.length_mm - 1.0) / velocity
    assert abs(result.t_last_expulsion_s - t_exact) <= transport.dt_s
    _report(6, "piecewise-constant transport oracle")


def test_criterion_7_conservation_and_byte_determinism(stock_config, tmp_path):
    started = time.perf_counter()
    # exact mass bookkeeping at every recorded sample of every pattern run
    for kind, t_on in (
        (PatternKind.PATTERN1, 1.0),
        (PatternKind.PATTERN2, 1.0),
        (PatternKind.PATTERN1, 2.0),
        (PatternKind.PATTERN1, 3.0),
    ):
        scene = build_scenario(
            stock_config,
            pattern=PatternSpec(kind, t_on, 1.0, n_cycles=stock_config.pattern.n_cycles),
        )
        result = run_scenario(scene, record_every=stock_config.decimation)
        assert mass_conservation_defect(result) == 0.0

    # two end-to-end CLI runs produce byte-identical CSV and SVG artifacts
    for experiment in ("sweep", "pressure", "patterns", "scenario"):
        out_a = tmp_path / "a" / experiment
        out_b = tmp_path / "b" / experiment
        assert main(["run", "--experiment", experiment, "--out", str(out_a), "--svg"]) == 0
        assert main(["run", "--experiment", experiment, "--out", str(out_b), "--svg"]) == 0
        for suffix in (".csv", ".svg"):
            fa = out_a / f"{experiment}{suffix}"
            fb = out_b / f"{experiment}{suffix}"
            assert filecmp.cmp(fa, fb, shallow=False), f"{experiment}{suffix} differs"
    assert time.perf_counter() - started < 30.0
    _report(7, "mass conservation and byte determinism")


def test_criterion_8_calibration_round_trips():
    started = time.perf_counter()

    # mechanics: noiseless synthetic table, predictions recovered to 1e-6
    true_response = ResponseParams(
        p_close_kpa={Cover.TYPE_I: 19.5, Cover.TYPE_II: 18.0, Cover.TYPE_III: 16.5},
        gamma={Cover.TYPE_I: 2.3, Cover.TYPE_II: 1.9, Cover.TYPE_III: 2.1},
        kappa={Cover.TYPE_I: 0.48, Cover.TYPE_II: 0.62, Cover.TYPE_III: 0.78},
        eta={Label.A1: 1.25, Label.A2: 0.95, Label.A3: 0.95},
    )
    rows = []
    for cover in Cover:
        for p in range(2, 21, 2):
            rows.append(
                MeasurementRow(
                    cover, Label.A1, float(p),
                    ratio=contraction_response(true_response, cover, float(p)),
                )
            )
        for label in (Label.A1, Label.A2):
            for p in (4.0, 10.0, 16.0):
                rows.append(
                    MeasurementRow(
                        cover, label, p,
                        gen_kpa=generated_pressure(true_response, cover, label, p),
                    )
                )
    table = MeasurementTable(rows=tuple(rows))
    fitted_response = calibrate_response(table, ResponseParams())
    for row in table.rows:
        if row.ratio is not None:
            predicted = contraction_response(fitted_response, row.cover, row.p_in_kpa)
            assert abs(predicted - row.ratio) <= 1e-6
        if row.gen_kpa is not None:
            predicted = generated_pressure(
                fitted_response, row.cover, row.label, row.p_in_kpa
            )
            assert abs(predicted - row.gen_kpa) <= 1e-6

    # transport: velocities synthesized by the simulator itself, recovered to 1e-3
    rectum = RectumSpec(length_mm=20.0, body_radius_mm=10.0, n_cells=3)
    ring = ActuatorSpec(Label.A1, Cover.TYPE_III, 27.0, 53.0, 15.0, 7.5)
    patterns = [
        PatternSpec(PatternKind.PATTERN1, 2.0, 1.0, 1),
        PatternSpec(PatternKind.PATTERN2, 2.0, 1.0, 1),
    ]
    template = Scenario(
        rectum=rectum,
        actuators=(ring,),
        response=ResponseParams(),
        lines={Label.A1: PneumaticLine(supply_kpa=10.0)},
        schedule=compile_pattern(patterns[0]),
        beads=(BeadSpec(length_mm=8.0, width_mm=6.0, mass_g=1.0, position_mm=1.0),),
        transport=TransportParams(),
        instant_pneumatics=True,
    )
    true_transport = replace(
        template.transport, p_fric_kpa=2.0, mobility_mm_per_kpa_s=8.0
    )
    measured = simulated_velocities(patterns, template, true_transport)
    fitted_transport = calibrate_transport(
        list(zip(patterns, measured)), template, init=template.transport
    )
    recovered = simulated_velocities(patterns, template, fitted_transport)
    for sim, target in zip(recovered, measured):
        assert abs(sim - target) <= 1e-3

    assert time.perf_counter() - started < 30.0
    _report(8, "calibration round trips")
