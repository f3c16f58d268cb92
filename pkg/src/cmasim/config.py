"""Scenario configuration: JSON parsing, validation, defaults, scene assembly.

Every knob of every module is reachable from one JSON document; absent
fields take their defaults and unknown keys are rejected. Parsing errors
name the offending field by its dotted path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .geometry import (
    BEAD_LENGTH_RANGE_MM,
    BEAD_WIDTH_RANGE_MM,
    DEFAULT_RING_CENTERS_MM,
    DEFAULT_RING_COVERS,
    DEFAULT_RING_HEIGHT_MM,
    RING_BORES_MM,
    ActuatorSpec,
    BeadSpec,
    Cover,
    Label,
    RectumSpec,
    make_bead,
)
from .mechanics import ResponseParams
from .pneumatics import PneumaticLine
from .sequencer import PatternKind, PatternSpec, compile_pattern
from .transport import Scenario, TransportParams


@dataclass(frozen=True)
class PneumaticsSettings:
    """Shared supply-chain settings plus per-ring chamber volumes."""

    supply_kpa: float = 10.0
    tube_inner_diameter_mm: float = 2.0
    tube_length_m: float = 2.0
    chamber_volume_ml: dict[Label, float] = field(
        default_factory=lambda: {Label.A1: 10.0, Label.A2: 18.0, Label.A3: 18.0}
    )
    vent_kpa: float = 0.0
    air_viscosity_pa_s: float = 1.81e-5

    def line_for(self, label: Label) -> PneumaticLine:
        return PneumaticLine(
            supply_kpa=self.supply_kpa,
            tube_inner_diameter_mm=self.tube_inner_diameter_mm,
            tube_length_m=self.tube_length_m,
            chamber_volume_ml=self.chamber_volume_ml[label],
            vent_kpa=self.vent_kpa,
            air_viscosity_pa_s=self.air_viscosity_pa_s,
        )


@dataclass(frozen=True)
class BolusSettings:
    """Uniform bead stack loaded into the lumen before a run.

    With ``start_mm`` unset the stack is placed so its most proximal bead
    sits half a bead length short of the first ring's span, i.e. already
    inside that ring's drive zone.
    """

    n_beads: int = 5
    length_mm: float = 20.0
    width_mm: float = 10.9
    density_g_per_cm3: float = 1.0
    gap_mm: float = 2.0
    start_mm: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated scene description."""

    rectum: RectumSpec
    actuators: tuple[ActuatorSpec, ...]
    response: ResponseParams
    pneumatics: PneumaticsSettings
    pattern: PatternSpec
    bolus: BolusSettings
    transport: TransportParams
    decimation: int = 10


_TOP_KEYS = {
    "rectum",
    "actuators",
    "response",
    "pneumatics",
    "pattern",
    "bolus",
    "transport",
    "output",
}


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'", field=path or "<root>")


def _section(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError("expected an object", field=key)
    return value


def _number(obj: dict, key: str, default: float, path: str) -> float:
    value = obj.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", field=f"{path}.{key}")
    return float(value)


def _integer(obj: dict, key: str, default: int, path: str) -> int:
    value = obj.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("expected an integer", field=f"{path}.{key}")
    return value


def _enum_map(obj: dict, key: str, enum, defaults: dict, path: str) -> dict:
    raw = obj.get(key)
    if raw is None:
        return dict(defaults)
    if not isinstance(raw, dict):
        raise ConfigError("expected an object keyed by name", field=f"{path}.{key}")
    result = dict(defaults)
    for name, value in raw.items():
        try:
            member = enum(name)
        except ValueError:
            raise ConfigError(
                f"unknown name '{name}'", field=f"{path}.{key}"
            ) from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", field=f"{path}.{key}.{name}")
        result[member] = float(value)
    return result


def _parse_rectum(doc: dict) -> RectumSpec:
    obj = _section(doc, "rectum")
    _check_keys(
        obj,
        {"length_mm", "body_radius_mm", "n_cells", "lumen_radius_mm", "lumen_radius_profile_mm"},
        "rectum",
    )
    n_cells = _integer(obj, "n_cells", 40, "rectum")
    profile = None
    if "lumen_radius_profile_mm" in obj:
        raw = obj["lumen_radius_profile_mm"]
        if not isinstance(raw, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw
        ):
            raise ConfigError("expected a list of numbers", field="rectum.lumen_radius_profile_mm")
        profile = tuple(float(v) for v in raw)
    elif "lumen_radius_mm" in obj:
        radius = _number(obj, "lumen_radius_mm", 12.5, "rectum")
        profile = (radius,) * n_cells
    try:
        return RectumSpec(
            length_mm=_number(obj, "length_mm", 164.0, "rectum"),
            body_radius_mm=_number(obj, "body_radius_mm", 35.0, "rectum"),
            n_cells=n_cells,
            lumen_radius_profile_mm=profile,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="rectum") from None


def _parse_actuators(doc: dict, rectum: RectumSpec) -> tuple[ActuatorSpec, ...]:
    raw = doc.get("actuators")
    if raw is None:
        raw = []
        for label in Label:
            d_in, d_out = RING_BORES_MM[label]
            raw.append(
                {
                    "label": label.value,
                    "cover": DEFAULT_RING_COVERS[label].value,
                    "d_inner_mm": d_in,
                    "d_outer_mm": d_out,
                    "height_mm": DEFAULT_RING_HEIGHT_MM,
                    "axial_center_mm": DEFAULT_RING_CENTERS_MM[label],
                }
            )
    if not isinstance(raw, list):
        raise ConfigError("expected a list", field="actuators")
    actuators = []
    for i, entry in enumerate(raw):
        path = f"actuators[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError("expected an object", field=path)
        _check_keys(
            entry,
            {"label", "cover", "d_inner_mm", "d_outer_mm", "height_mm", "axial_center_mm"},
            path,
        )
        try:
            label = Label(entry.get("label"))
        except ValueError:
            raise ConfigError("label must be A1, A2 or A3", field=f"{path}.label") from None
        try:
            cover = Cover(entry.get("cover", DEFAULT_RING_COVERS[label].value))
        except ValueError:
            raise ConfigError(
                "cover must be TypeI, TypeII or TypeIII", field=f"{path}.cover"
            ) from None
        d_in_default, d_out_default = RING_BORES_MM[label]
        try:
            actuators.append(
                ActuatorSpec(
                    label=label,
                    cover=cover,
                    d_inner_mm=_number(entry, "d_inner_mm", d_in_default, path),
                    d_outer_mm=_number(entry, "d_outer_mm", d_out_default, path),
                    height_mm=_number(entry, "height_mm", DEFAULT_RING_HEIGHT_MM, path),
                    axial_center_mm=_number(
                        entry, "axial_center_mm", DEFAULT_RING_CENTERS_MM[label], path
                    ),
                )
            )
        except ValueError as exc:
            raise ConfigError(str(exc), field=path) from None
    labels = [a.label for a in actuators]
    if len(labels) != len(set(labels)) or set(labels) != set(Label):
        raise ConfigError(
            "must define exactly the rings A1, A2 and A3", field="actuators"
        )
    for i, actuator in enumerate(actuators):
        lo, hi = actuator.span_mm
        if lo < 0.0 or hi > rectum.length_mm:
            raise ConfigError(
                f"ring span [{lo}, {hi}] mm exceeds the rectum",
                field=f"actuators[{i}].axial_center_mm",
            )
    return tuple(sorted(actuators, key=lambda a: a.label.value))


def _parse_response(doc: dict) -> ResponseParams:
    obj = _section(doc, "response")
    _check_keys(obj, {"p_close_kpa", "gamma", "kappa", "eta"}, "response")
    defaults = ResponseParams()
    try:
        return ResponseParams(
            p_close_kpa=_enum_map(obj, "p_close_kpa", Cover, defaults.p_close_kpa, "response"),
            gamma=_enum_map(obj, "gamma", Cover, defaults.gamma, "response"),
            kappa=_enum_map(obj, "kappa", Cover, defaults.kappa, "response"),
            eta=_enum_map(obj, "eta", Label, defaults.eta, "response"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="response") from None


def _parse_pneumatics(doc: dict) -> PneumaticsSettings:
    obj = _section(doc, "pneumatics")
    _check_keys(
        obj,
        {
            "supply_kpa",
            "tube_inner_diameter_mm",
            "tube_length_m",
            "chamber_volume_ml",
            "vent_kpa",
            "air_viscosity_pa_s",
        },
        "pneumatics",
    )
    defaults = PneumaticsSettings()
    volumes_raw = obj.get("chamber_volume_ml")
    if volumes_raw is None:
        volumes = dict(defaults.chamber_volume_ml)
    elif isinstance(volumes_raw, (int, float)) and not isinstance(volumes_raw, bool):
        volumes = {label: float(volumes_raw) for label in Label}
    else:
        volumes = _enum_map(
            obj, "chamber_volume_ml", Label, defaults.chamber_volume_ml, "pneumatics"
        )
    settings = PneumaticsSettings(
        supply_kpa=_number(obj, "supply_kpa", defaults.supply_kpa, "pneumatics"),
        tube_inner_diameter_mm=_number(
            obj, "tube_inner_diameter_mm", defaults.tube_inner_diameter_mm, "pneumatics"
        ),
        tube_length_m=_number(obj, "tube_length_m", defaults.tube_length_m, "pneumatics"),
        chamber_volume_ml=volumes,
        vent_kpa=_number(obj, "vent_kpa", defaults.vent_kpa, "pneumatics"),
        air_viscosity_pa_s=_number(
            obj, "air_viscosity_pa_s", defaults.air_viscosity_pa_s, "pneumatics"
        ),
    )
    for label in Label:
        try:
            settings.line_for(label)
        except ValueError as exc:
            raise ConfigError(str(exc), field="pneumatics") from None
    return settings


def _parse_pattern(doc: dict) -> PatternSpec:
    obj = _section(doc, "pattern")
    _check_keys(obj, {"kind", "t_on_s", "t_off_s", "n_cycles"}, "pattern")
    kind_raw = obj.get("kind", PatternKind.PATTERN1.value)
    try:
        kind = PatternKind(kind_raw)
    except ValueError:
        raise ConfigError(
            "kind must be pattern1 or pattern2", field="pattern.kind"
        ) from None
    if kind is PatternKind.CUSTOM:
        raise ConfigError(
            "custom timelines are loaded from CSV, not inline JSON",
            field="pattern.kind",
        )
    try:
        return PatternSpec(
            kind=kind,
            t_on_s=_number(obj, "t_on_s", 1.0, "pattern"),
            t_off_s=_number(obj, "t_off_s", 1.0, "pattern"),
            n_cycles=_integer(obj, "n_cycles", 6, "pattern"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), field="pattern") from None


def _parse_bolus(doc: dict) -> BolusSettings:
    obj = _section(doc, "bolus")
    _check_keys(
        obj,
        {"n_beads", "length_mm", "width_mm", "density_g_per_cm3", "gap_mm", "start_mm"},
        "bolus",
    )
    defaults = BolusSettings()
    start = None
    if obj.get("start_mm") is not None:
        start = _number(obj, "start_mm", 0.0, "bolus")
    settings = BolusSettings(
        n_beads=_integer(obj, "n_beads", defaults.n_beads, "bolus"),
        length_mm=_number(obj, "length_mm", defaults.length_mm, "bolus"),
        width_mm=_number(obj, "width_mm", defaults.width_mm, "bolus"),
        density_g_per_cm3=_number(
            obj, "density_g_per_cm3", defaults.density_g_per_cm3, "bolus"
        ),
        gap_mm=_number(obj, "gap_mm", defaults.gap_mm, "bolus"),
        start_mm=start,
    )
    if settings.n_beads < 1:
        raise ConfigError("need at least one bead", field="bolus.n_beads")
    lo, hi = BEAD_LENGTH_RANGE_MM
    if not lo <= settings.length_mm <= hi:
        raise ConfigError(f"must lie in [{lo}, {hi}] mm", field="bolus.length_mm")
    lo, hi = BEAD_WIDTH_RANGE_MM
    if not lo <= settings.width_mm <= hi:
        raise ConfigError(f"must lie in [{lo}, {hi}] mm", field="bolus.width_mm")
    if settings.density_g_per_cm3 <= 0.0:
        raise ConfigError("must be positive", field="bolus.density_g_per_cm3")
    if settings.gap_mm < 0.0:
        raise ConfigError("cannot be negative", field="bolus.gap_mm")
    return settings


def _parse_transport(doc: dict) -> TransportParams:
    obj = _section(doc, "transport")
    _check_keys(
        obj, {"p_fric_kpa", "mobility_mm_per_kpa_s", "o_push", "o_block", "dt_s"}, "transport"
    )
    defaults = TransportParams()
    values = {
        "p_fric_kpa": _number(obj, "p_fric_kpa", defaults.p_fric_kpa, "transport"),
        "mobility_mm_per_kpa_s": _number(
            obj, "mobility_mm_per_kpa_s", defaults.mobility_mm_per_kpa_s, "transport"
        ),
        "o_push": _number(obj, "o_push", defaults.o_push, "transport"),
        "o_block": _number(obj, "o_block", defaults.o_block, "transport"),
        "dt_s": _number(obj, "dt_s", defaults.dt_s, "transport"),
    }
    if values["dt_s"] <= 0.0:
        raise ConfigError("must be positive", field="transport.dt_s")
    if values["p_fric_kpa"] <= 0.0:
        raise ConfigError("must be positive", field="transport.p_fric_kpa")
    if values["mobility_mm_per_kpa_s"] <= 0.0:
        raise ConfigError("must be positive", field="transport.mobility_mm_per_kpa_s")
    try:
        return TransportParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc), field="transport") from None


def parse_config_dict(doc: dict) -> ScenarioConfig:
    """Validate a decoded JSON object into a ScenarioConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be an object", field="<root>")
    _check_keys(doc, _TOP_KEYS, "")
    rectum = _parse_rectum(doc)
    actuators = _parse_actuators(doc, rectum)
    response = _parse_response(doc)
    pneumatics = _parse_pneumatics(doc)
    pattern = _parse_pattern(doc)
    bolus = _parse_bolus(doc)
    transport = _parse_transport(doc)

    output = _section(doc, "output")
    _check_keys(output, {"decimation"}, "output")
    decimation = _integer(output, "decimation", 10, "output")
    if decimation < 1:
        raise ConfigError("must be >= 1", field="output.decimation")

    config = ScenarioConfig(
        rectum=rectum,
        actuators=actuators,
        response=response,
        pneumatics=pneumatics,
        pattern=pattern,
        bolus=bolus,
        transport=transport,
        decimation=decimation,
    )
    # Fail configuration problems at parse time, not mid-run.
    build_scenario(config)
    return config


def parse_config(document: str) -> ScenarioConfig:
    """Parse a JSON configuration document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return parse_config_dict(doc)


def default_config() -> ScenarioConfig:
    return parse_config("{}")


def build_beads(config: ScenarioConfig) -> tuple[BeadSpec, ...]:
    """Place the configured bead stack in the lumen."""
    bolus = config.bolus
    start = bolus.start_mm
    if start is None:
        a1 = next(a for a in config.actuators if a.label is Label.A1)
        start = a1.span_mm[0] - bolus.length_mm / 2.0
    beads = []
    for i in range(bolus.n_beads):
        position = start + i * (bolus.length_mm + bolus.gap_mm)
        beads.append(
            make_bead(
                bolus.length_mm,
                bolus.width_mm,
                bolus.density_g_per_cm3,
                position_mm=position,
            )
        )
    return tuple(beads)


def build_scenario(
    config: ScenarioConfig,
    pattern: PatternSpec | None = None,
    instant_pneumatics: bool = False,
) -> Scenario:
    """Assemble the runnable scene, optionally overriding the valve pattern."""
    chosen = pattern if pattern is not None else config.pattern
    try:
        return Scenario(
            rectum=config.rectum,
            actuators=config.actuators,
            response=config.response,
            lines={label: config.pneumatics.line_for(label) for label in Label},
            schedule=compile_pattern(chosen),
            beads=build_beads(config),
            transport=config.transport,
            instant_pneumatics=instant_pneumatics,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def with_transport(config: ScenarioConfig, transport: TransportParams) -> ScenarioConfig:
    return replace(config, transport=transport)


def serialize_config(config: ScenarioConfig) -> dict:
    """Dump a config to the JSON layout accepted by parse_config."""
    return {
        "rectum": {
            "length_mm": config.rectum.length_mm,
            "body_radius_mm": config.rectum.body_radius_mm,
            "n_cells": config.rectum.n_cells,
            "lumen_radius_profile_mm": list(config.rectum.lumen_radius_profile_mm),
        },
        "actuators": [
            {
                "label": a.label.value,
                "cover": a.cover.value,
                "d_inner_mm": a.d_inner_mm,
                "d_outer_mm": a.d_outer_mm,
                "height_mm": a.height_mm,
                "axial_center_mm": a.axial_center_mm,
            }
            for a in config.actuators
        ],
        "response": {
            "p_close_kpa": {c.value: config.response.p_close_kpa[c] for c in Cover},
            "gamma": {c.value: config.response.gamma[c] for c in Cover},
            "kappa": {c.value: config.response.kappa[c] for c in Cover},
            "eta": {l.value: config.response.eta[l] for l in Label},
        },
        "pneumatics": {
            "supply_kpa": config.pneumatics.supply_kpa,
            "tube_inner_diameter_mm": config.pneumatics.tube_inner_diameter_mm,
            "tube_length_m": config.pneumatics.tube_length_m,
            "chamber_volume_ml": {
                l.value: config.pneumatics.chamber_volume_ml[l] for l in Label
            },
            "vent_kpa": config.pneumatics.vent_kpa,
            "air_viscosity_pa_s": config.pneumatics.air_viscosity_pa_s,
        },
        "pattern": {
            "kind": config.pattern.kind.value,
            "t_on_s": config.pattern.t_on_s,
            "t_off_s": config.pattern.t_off_s,
            "n_cycles": config.pattern.n_cycles,
        },
        "bolus": {
            "n_beads": config.bolus.n_beads,
            "length_mm": config.bolus.length_mm,
            "width_mm": config.bolus.width_mm,
            "density_g_per_cm3": config.bolus.density_g_per_cm3,
            "gap_mm": config.bolus.gap_mm,
            "start_mm": config.bolus.start_mm,
        },
        "transport": {
            "p_fric_kpa": config.transport.p_fric_kpa,
            "mobility_mm_per_kpa_s": config.transport.mobility_mm_per_kpa_s,
            "o_push": config.transport.o_push,
            "o_block": config.transport.o_block,
            "dt_s": config.transport.dt_s,
        },
        "output": {"decimation": config.decimation},
    }


def config_hash(config: ScenarioConfig) -> str:
    """Stable hash of the fully resolved configuration."""
    canonical = json.dumps(serialize_config(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
