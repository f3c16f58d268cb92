import math
from dataclasses import replace

import numpy as np
import pytest

from cmasim import _kernel
from cmasim.config import build_scenario, default_config
from cmasim.errors import CalibrationError
from cmasim.geometry import ActuatorSpec, BeadSpec, Cover, Label, RectumSpec, cell_grid
from cmasim.mechanics import ResponseParams
from cmasim.pneumatics import PneumaticLine
from cmasim.sequencer import PatternKind, PatternSpec, compile_pattern
from cmasim.transport import (
    Scenario,
    TransportParams,
    bolus_step,
    calibrate_transport,
    defecation_velocity,
    occlusion_profile,
    run_scenario,
    simulated_velocities,
)


def default_scene(**overrides):
    cfg = default_config()
    if overrides:
        cfg = replace(cfg, **overrides)
    return build_scenario(cfg)


def toy_scene(
    supply_kpa: float = 10.0,
    schedule=None,
    transport: TransportParams | None = None,
) -> Scenario:
    """Three-cell tube, one ring over the inlet, one bead: closed-form scenario."""
    rectum = RectumSpec(length_mm=20.0, body_radius_mm=10.0, n_cells=3)
    ring = ActuatorSpec(Label.A1, Cover.TYPE_III, 27.0, 53.0, 15.0, 7.5)
    if schedule is None:
        schedule = compile_pattern(
            PatternSpec(
                kind=PatternKind.CUSTOM,
                custom_timeline=((0.0, Label.A1, True), (2.0, Label.A1, False)),
                custom_duration_s=2.5,
            )
        )
    return Scenario(
        rectum=rectum,
        actuators=(ring,),
        response=ResponseParams(),
        lines={Label.A1: PneumaticLine(supply_kpa=supply_kpa)},
        schedule=schedule,
        beads=(BeadSpec(length_mm=8.0, width_mm=6.0, mass_g=1.0, position_mm=1.0),),
        transport=transport if transport is not None else TransportParams(),
        instant_pneumatics=True,
    )


# ---------------------------------------------------------------------------
# occlusion_profile
# ---------------------------------------------------------------------------


def test_occlusion_profile_rest():
    scene = default_scene()
    grid = cell_grid(scene.rectum)
    profile = occlusion_profile(scene.actuators, {l: 0.0 for l in Label}, grid)
    assert profile == [0.0] * len(grid)


def test_occlusion_profile_single_ring():
    scene = default_scene()
    grid = cell_grid(scene.rectum)
    ratios = {Label.A1: 0.0, Label.A2: 0.0, Label.A3: 1.0}
    profile = occlusion_profile(scene.actuators, ratios, grid)
    a3 = next(a for a in scene.actuators if a.label is Label.A3)
    lo, hi = a3.span_mm
    for value, (c_lo, c_hi) in zip(profile, grid):
        mid = (c_lo + c_hi) / 2.0
        assert value == (1.0 if lo <= mid <= hi else 0.0)


def test_occlusion_profile_disjoint_rings_no_bleed():
    # A2 span [100.5, 115.5] covers cells 25-27 of the default 4.1 mm grid;
    # A3 span [145.5, 160.5] covers cells 35-38.
    scene = default_scene()
    grid = cell_grid(scene.rectum)
    ratios = {Label.A1: 0.0, Label.A2: 0.3, Label.A3: 0.9}
    profile = occlusion_profile(scene.actuators, ratios, grid)
    expected = [0.0] * 40
    for c in (25, 26, 27):
        expected[c] = 0.3
    for c in (35, 36, 37, 38):
        expected[c] = 0.9
    assert profile == expected


def test_occlusion_profile_rejects_bad_ratio():
    scene = default_scene()
    grid = cell_grid(scene.rectum)
    with pytest.raises(ValueError):
        occlusion_profile(scene.actuators, {Label.A1: 1.2, Label.A2: 0.0, Label.A3: 0.0}, grid)


def test_occlusion_profile_overlapping_spans_take_maximum():
    rings = (
        ActuatorSpec(Label.A1, Cover.TYPE_III, 27.0, 53.0, 40.0, 50.0),  # [30, 70]
        ActuatorSpec(Label.A2, Cover.TYPE_III, 44.0, 66.0, 40.0, 80.0),  # [60, 100]
    )
    grid = [(55.0, 65.0)]  # midpoint 60 sits under both rings
    profile = occlusion_profile(rings, {Label.A1: 0.4, Label.A2: 0.7}, grid)
    assert profile == [0.7]


# ---------------------------------------------------------------------------
# bolus_step
# ---------------------------------------------------------------------------


def _step_kit():
    scene = default_scene()
    zero = {l: 0.0 for l in Label}
    return scene, zero


def test_bolus_step_no_actuation_keeps_positions():
    scene, zero = _step_kit()
    updated, expelled = bolus_step(
        scene.beads, scene.actuators, zero, zero, scene.transport, 0.001, scene.rectum
    )
    assert expelled == ()
    assert [b.position_mm for b in updated] == [b.position_mm for b in scene.beads]


def test_bolus_step_velocity_formula():
    # drive 9.6 kPa against friction 1 at mobility 5: 43 mm/s, 0.043 mm per ms
    scene, _ = _step_kit()
    params = replace(scene.transport, p_fric_kpa=1.0, mobility_mm_per_kpa_s=5.0)
    bead = BeadSpec(length_mm=20.0, width_mm=10.0, mass_g=1.0, position_mm=80.0)
    ratios = {Label.A1: 0.3, Label.A2: 0.0, Label.A3: 0.0}
    gens = {Label.A1: 9.6, Label.A2: 0.0, Label.A3: 0.0}
    updated, _ = bolus_step(
        (bead,), scene.actuators, ratios, gens, params, 0.001, scene.rectum
    )
    # A1 span [55.5, 70.5] sits behind the rear (80) within one bead length
    assert updated[0].position_mm - 80.0 == pytest.approx(0.043, rel=1e-9)


def test_bolus_step_blocked_by_ring_ahead():
    scene, _ = _step_kit()
    bead = BeadSpec(length_mm=20.0, width_mm=10.0, mass_g=1.0, position_mm=80.0)
    ratios = {Label.A1: 0.3, Label.A2: 0.9, Label.A3: 0.0}  # A2 ahead, sealed
    gens = {Label.A1: 9.6, Label.A2: 8.0, Label.A3: 0.0}
    updated, _ = bolus_step(
        (bead,), scene.actuators, ratios, gens, scene.transport, 0.001, scene.rectum
    )
    assert updated[0].position_mm == 80.0


def test_bolus_step_driving_ring_does_not_block_itself():
    scene, _ = _step_kit()
    bead = BeadSpec(length_mm=20.0, width_mm=10.0, mass_g=1.0, position_mm=95.0)
    # A2 overlaps the bead: it drives it even above the blocking threshold
    ratios = {Label.A1: 0.0, Label.A2: 0.9, Label.A3: 0.0}
    gens = {Label.A1: 0.0, Label.A2: 8.0, Label.A3: 0.0}
    updated, _ = bolus_step(
        (bead,), scene.actuators, ratios, gens, scene.transport, 0.001, scene.rectum
    )
    assert updated[0].position_mm > 95.0


def test_bolus_step_clamps_to_bead_ahead():
    scene, _ = _step_kit()
    params = replace(scene.transport, mobility_mm_per_kpa_s=1000.0, p_fric_kpa=1.0)
    beads = (
        BeadSpec(length_mm=20.0, width_mm=10.0, mass_g=1.0, position_mm=80.0),
        BeadSpec(length_mm=20.0, width_mm=10.0, mass_g=1.0, position_mm=101.0),
    )
    # only the rear bead is driven (huge hypothetical step): must not overlap
    ratios = {Label.A1: 0.3, Label.A2: 0.0, Label.A3: 0.0}
    gens = {Label.A1: 9.6, Label.A2: 0.0, Label.A3: 0.0}
    updated, _ = bolus_step(beads, scene.actuators, ratios, gens, params, 0.01, scene.rectum)
    assert updated[0].front_mm <= updated[1].position_mm


def test_bolus_step_rejects_overlapping_beads():
    scene, zero = _step_kit()
    beads = (
        BeadSpec(length_mm=20.0, width_mm=10.0, mass_g=1.0, position_mm=50.0),
        BeadSpec(length_mm=20.0, width_mm=10.0, mass_g=1.0, position_mm=60.0),
    )
    with pytest.raises(ValueError):
        bolus_step(beads, scene.actuators, zero, zero, scene.transport, 0.001, scene.rectum)


# ---------------------------------------------------------------------------
# run_scenario
# ---------------------------------------------------------------------------


def test_null_stimulus_moves_nothing():
    schedule = compile_pattern(
        PatternSpec(kind=PatternKind.CUSTOM, custom_timeline=(), custom_duration_s=4.0)
    )
    scene = replace(default_scene(), schedule=schedule)
    result = run_scenario(scene, record_every=100)
    assert result.expelled_total_g == 0.0
    assert result.defecation_velocity_gps == 0.0
    assert result.incomplete
    assert np.array_equal(result.positions_mm[0], result.positions_mm[-1])


def test_expulsion_matches_closed_form_oracle():
    scene = toy_scene()
    params = scene.transport
    result = run_scenario(scene)
    drive = 0.8 * 1.2 * 10.0  # kappa(TypeIII) * eta(A1) * supply
    velocity = params.mobility_mm_per_kpa_s * (drive - params.p_fric_kpa)
    t_exact = (scene.rectum.length_mm - scene.beads[0].position_mm) / velocity
    assert result.t_last_expulsion_s is not None
    assert abs(result.t_last_expulsion_s - t_exact) <= params.dt_s
    assert result.expelled_total_g == 1.0
    assert not result.incomplete


def test_defecation_velocity_definition():
    scene = toy_scene()
    result = run_scenario(scene)
    assert result.defecation_velocity_gps == pytest.approx(
        result.expelled_total_g / (result.t_last_expulsion_s - result.t_first_open_s)
    )
    assert defecation_velocity(result) == result.defecation_velocity_gps


def test_velocity_hand_example():
    # 0.66 g expelled at 3 s with the first valve opening at 0
    scene = toy_scene()
    result = run_scenario(scene)
    fake = replace(
        result,
        expelled_total_g=0.66,
        t_last_expulsion_s=3.0,
        t_first_open_s=0.0,
    )
    assert defecation_velocity(fake) == pytest.approx(0.22)


def test_mass_conservation_and_monotone_positions():
    scene = default_scene()
    result = run_scenario(scene, record_every=10)
    total = math.fsum(result.bead_masses_g)
    n_beads = len(result.bead_masses_g)
    for k in range(len(result.times_s)):
        in_lumen = [
            result.bead_masses_g[i]
            for i in range(n_beads)
            if not math.isnan(result.positions_mm[k, i])
        ]
        expelled = [
            result.bead_masses_g[i]
            for i in range(n_beads)
            if math.isnan(result.positions_mm[k, i])
        ]
        assert math.fsum(in_lumen + expelled) == total
        assert float(result.expelled_mass_g[k]) == math.fsum(expelled)
    # expelled mass never decreases
    assert np.all(np.diff(result.expelled_mass_g) >= 0.0)
    # every bead's position is non-decreasing while it is in the lumen
    pos = result.positions_mm
    for i in range(n_beads):
        alive = ~np.isnan(pos[:, i])
        series = pos[alive, i]
        assert np.all(np.diff(series) >= 0.0)


def test_no_overlap_at_any_sample():
    scene = default_scene()
    result = run_scenario(scene, record_every=10)
    lengths = [b.length_mm for b in scene.beads]
    pos = result.positions_mm
    for k in range(pos.shape[0]):
        for i in range(len(lengths) - 1):
            if math.isnan(pos[k, i]) or math.isnan(pos[k, i + 1]):
                continue
            assert pos[k, i] + lengths[i] <= pos[k, i + 1] + 1e-9


def test_runs_are_deterministic():
    scene = default_scene()
    r1 = run_scenario(scene, record_every=25)
    r2 = run_scenario(scene, record_every=25)
    assert np.array_equal(r1.times_s, r2.times_s)
    assert np.array_equal(r1.pressures_kpa, r2.pressures_kpa)
    assert np.array_equal(r1.occlusions, r2.occlusions)
    assert np.array_equal(r1.positions_mm, r2.positions_mm, equal_nan=True)
    assert r1.expelled_total_g == r2.expelled_total_g
    assert r1.makespan_s == r2.makespan_s


def test_pattern1_velocity_declines_with_hold_time():
    scene = default_scene()
    velocities = simulated_velocities(
        [
            PatternSpec(PatternKind.PATTERN1, t, 1.0, n_cycles=6)
            for t in (1.0, 2.0, 3.0)
        ],
        scene,
        scene.transport,
    )
    assert velocities[0] > velocities[1] > velocities[2]


def test_pressures_stay_bounded():
    scene = default_scene()
    result = run_scenario(scene, record_every=10)
    assert np.all(result.pressures_kpa >= 0.0)
    assert np.all(result.pressures_kpa <= 10.0 + 1e-12)
    assert np.all(result.occlusions >= 0.0)
    assert np.all(result.occlusions <= 1.0)


def test_kernel_python_fallback_matches_jit():
    if not hasattr(_kernel.step_loop, "py_func"):
        pytest.skip("kernel already running without numba")
    scene = replace(
        default_scene(),
        schedule=compile_pattern(PatternSpec(PatternKind.PATTERN2, 1.0, 1.0, 1)),
    )
    jit_result = run_scenario(scene, record_every=50)
    compiled = _kernel.step_loop
    try:
        _kernel.step_loop = compiled.py_func
        py_result = run_scenario(scene, record_every=50)
    finally:
        _kernel.step_loop = compiled
    assert np.allclose(
        jit_result.positions_mm, py_result.positions_mm, rtol=1e-12, equal_nan=True
    )
    assert np.allclose(jit_result.pressures_kpa, py_result.pressures_kpa, rtol=1e-12)
    assert jit_result.makespan_s == py_result.makespan_s


def test_dt_guard_enforced_at_scene_construction():
    cfg = default_config()
    bad = replace(cfg, transport=replace(cfg.transport, dt_s=0.01))
    with pytest.raises(ValueError):
        build_scenario(bad)


def test_runaway_cap_flags_incomplete_without_crash():
    # A bead stranded beyond the ring's reach while the chamber vents so
    # slowly that the occlusion never relaxes: the run must stop at the cap.
    scene = toy_scene()
    slow_vent = PneumaticLine(
        supply_kpa=10.0, time_constant_vent_s=1e6
    )
    stranded = BeadSpec(length_mm=8.0, width_mm=6.0, mass_g=1.0, position_mm=30.0)
    scene = replace(
        scene,
        rectum=RectumSpec(length_mm=60.0, body_radius_mm=10.0, n_cells=3),
        instant_pneumatics=False,
        lines={Label.A1: slow_vent},
        beads=(stranded,),
    )
    result = run_scenario(scene, record_every=100)
    assert result.incomplete
    assert result.expelled_total_g == 0.0
    assert result.makespan_s == pytest.approx(10 * scene.schedule.total_duration_s)


def test_run_scenario_requires_beads():
    scene = replace(default_scene(), beads=())
    with pytest.raises(ValueError):
        run_scenario(scene)


# ---------------------------------------------------------------------------
# calibrate_transport
# ---------------------------------------------------------------------------


def _toy_patterns():
    return [
        PatternSpec(PatternKind.PATTERN1, 2.0, 1.0, 1),
        PatternSpec(PatternKind.PATTERN2, 2.0, 1.0, 1),
    ]


def test_transport_calibration_round_trip():
    template = toy_scene(schedule=compile_pattern(_toy_patterns()[0]))
    true_params = replace(
        template.transport, p_fric_kpa=2.0, mobility_mm_per_kpa_s=8.0
    )
    patterns = _toy_patterns()
    targets = simulated_velocities(patterns, template, true_params)
    fitted = calibrate_transport(
        list(zip(patterns, targets)), template, init=template.transport
    )
    recovered = simulated_velocities(patterns, template, fitted)
    for measured, sim in zip(targets, recovered):
        assert abs(sim - measured) <= 1e-3


def test_transport_calibration_objective_non_increasing():
    template = toy_scene(schedule=compile_pattern(_toy_patterns()[0]))
    patterns = _toy_patterns()
    target = [1.5, 1.5]

    def sse(params):
        v = simulated_velocities(patterns, template, params)
        return sum((a - b) ** 2 for a, b in zip(v, target))

    fitted = calibrate_transport(list(zip(patterns, target)), template)
    assert sse(fitted) <= sse(template.transport)


def test_transport_calibration_requires_two_targets():
    template = toy_scene()
    with pytest.raises(ValueError):
        calibrate_transport([(_toy_patterns()[0], 0.4)], template)


def test_transport_calibration_detects_dead_scene():
    template = toy_scene(supply_kpa=0.0, schedule=compile_pattern(_toy_patterns()[0]))
    with pytest.raises(CalibrationError):
        calibrate_transport(list(zip(_toy_patterns(), [0.4, 0.2])), template)
