"""Dimensions of the rectum model, the three contractile rings, and stool beads.

All lengths are millimetres, areas mm^2, masses grams. The rectum axis runs
from 0 (proximal/sigmoid side) to ``length_mm`` (outlet).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Label(str, Enum):
    """Ring identity, proximal to distal."""

    A1 = "A1"
    A2 = "A2"
    A3 = "A3"


class Cover(str, Enum):
    """Outer constraint of a ring: bare elastomer, film wrap, or rigid frame."""

    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    TYPE_III = "TypeIII"


# Bead dimensions accepted by make_bead (matches the gel beads the rig uses).
BEAD_LENGTH_RANGE_MM = (15.0, 20.0)
BEAD_WIDTH_RANGE_MM = (5.0, 12.0)

DEFAULT_RING_HEIGHT_MM = 15.0
DEFAULT_LUMEN_RADIUS_MM = 12.5

# Ring bores: A1 is the narrow outlet-style ring, A2/A3 share the wide bore.
RING_BORES_MM = {
    Label.A1: (27.0, 53.0),
    Label.A2: (44.0, 66.0),
    Label.A3: (44.0, 66.0),
}

# Axial centres chosen so the drive zones of consecutive rings tile the tube
# for every legal bead length (gap between spans <= 2 * 15 mm) and the last
# ring can push a bead's rear past the outlet (span end + 15 >= 164).
DEFAULT_RING_CENTERS_MM = {
    Label.A1: 63.0,
    Label.A2: 108.0,
    Label.A3: 153.0,
}

# Stock cover assignment; the film-wrapped mid ring reproduces the measured
# velocity spread between the staggered and sequential drive patterns.
DEFAULT_RING_COVERS = {
    Label.A1: Cover.TYPE_III,
    Label.A2: Cover.TYPE_II,
    Label.A3: Cover.TYPE_III,
}


@dataclass(frozen=True)
class ActuatorSpec:
    """One ring-shaped actuator mounted around the rectum body."""

    label: Label
    cover: Cover
    d_inner_mm: float
    d_outer_mm: float
    height_mm: float
    axial_center_mm: float

    def __post_init__(self):
        if not 0.0 < self.d_inner_mm < self.d_outer_mm:
            raise ValueError(
                f"ring {self.label.value}: need 0 < d_inner < d_outer, "
                f"got {self.d_inner_mm} / {self.d_outer_mm}"
            )
        if self.height_mm <= 0.0:
            raise ValueError(f"ring {self.label.value}: height must be positive")
        if self.axial_center_mm - self.height_mm / 2.0 < 0.0:
            raise ValueError(
                f"ring {self.label.value}: span extends past the proximal end"
            )

    @property
    def span_mm(self) -> tuple[float, float]:
        """Axial interval covered by the ring."""
        half = self.height_mm / 2.0
        return (self.axial_center_mm - half, self.axial_center_mm + half)


@dataclass(frozen=True)
class RectumSpec:
    """Soft rectum body holding the lumen the beads travel through."""

    length_mm: float = 164.0
    body_radius_mm: float = 35.0
    n_cells: int = 40
    lumen_radius_profile_mm: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.length_mm <= 0.0:
            raise ValueError("rectum length must be positive")
        if self.body_radius_mm <= 0.0:
            raise ValueError("body radius must be positive")
        if self.n_cells < 3:
            raise ValueError(f"need at least 3 axial cells, got {self.n_cells}")
        profile = self.lumen_radius_profile_mm
        if profile is None:
            profile = (DEFAULT_LUMEN_RADIUS_MM,) * self.n_cells
            object.__setattr__(self, "lumen_radius_profile_mm", profile)
        if len(profile) != self.n_cells:
            raise ValueError(
                f"lumen profile has {len(profile)} entries for {self.n_cells} cells"
            )
        if any(r <= 0.0 for r in profile):
            raise ValueError("lumen radii must be positive")


@dataclass(frozen=True)
class BeadSpec:
    """One simulated stool bead; ``position_mm`` is the axial coordinate of its rear."""

    length_mm: float
    width_mm: float
    mass_g: float
    position_mm: float = 0.0

    def __post_init__(self):
        if self.length_mm <= 0.0 or self.width_mm <= 0.0:
            raise ValueError("bead dimensions must be positive")
        if self.mass_g <= 0.0:
            raise ValueError("bead mass must be positive")

    @property
    def front_mm(self) -> float:
        return self.position_mm + self.length_mm


def bore_area(d_inner_mm: float) -> float:
    """Resting open area of a ring bore, mm^2."""
    if d_inner_mm <= 0.0:
        raise ValueError(f"bore diameter must be positive, got {d_inner_mm}")
    return math.pi * (d_inner_mm / 2.0) ** 2


def contraction_ratio(a_rest_mm2: float, a_now_mm2: float) -> float:
    """Area shrinkage 1 - a_now/a_rest; 0 at rest, 1 at full occlusion."""
    if a_rest_mm2 <= 0.0:
        raise ValueError("resting area must be positive")
    if a_now_mm2 < 0.0:
        raise ValueError("current area cannot be negative")
    if a_now_mm2 > a_rest_mm2:
        raise ValueError(
            f"current area {a_now_mm2} exceeds resting area {a_rest_mm2} "
            "(expansion, not contraction)"
        )
    return 1.0 - a_now_mm2 / a_rest_mm2


def make_bead(
    length_mm: float,
    width_mm: float,
    density_g_per_cm3: float,
    position_mm: float = 0.0,
) -> BeadSpec:
    """Build a bead as a prolate ellipsoid of the given density.

    Dimensions must fall inside the ranges the bead-making procedure
    produces (length 15-20 mm, width 5-12 mm).
    """
    lo, hi = BEAD_LENGTH_RANGE_MM
    if not lo <= length_mm <= hi:
        raise ValueError(f"bead length {length_mm} outside [{lo}, {hi}] mm")
    lo, hi = BEAD_WIDTH_RANGE_MM
    if not lo <= width_mm <= hi:
        raise ValueError(f"bead width {width_mm} outside [{lo}, {hi}] mm")
    if density_g_per_cm3 <= 0.0:
        raise ValueError("bead density must be positive")
    volume_mm3 = (4.0 / 3.0) * math.pi * (length_mm / 2.0) * (width_mm / 2.0) ** 2
    mass_g = density_g_per_cm3 * volume_mm3 / 1000.0
    return BeadSpec(
        length_mm=length_mm,
        width_mm=width_mm,
        mass_g=mass_g,
        position_mm=position_mm,
    )


def cell_grid(rectum: RectumSpec) -> list[tuple[float, float]]:
    """Partition [0, length] into n_cells equal contiguous intervals."""
    n = rectum.n_cells
    length = rectum.length_mm
    edges = [i * length / n for i in range(n + 1)]
    return [(edges[i], edges[i + 1]) for i in range(n)]


def default_actuators(
    cover: Cover | None = None,
    height_mm: float = DEFAULT_RING_HEIGHT_MM,
) -> tuple[ActuatorSpec, ActuatorSpec, ActuatorSpec]:
    """The stock three-ring arrangement on the default rectum body.

    Pass ``cover`` to force one cover type onto all three rings; the default
    is the mixed stock assignment.
    """
    rings = []
    for label in Label:
        d_in, d_out = RING_BORES_MM[label]
        rings.append(
            ActuatorSpec(
                label=label,
                cover=cover if cover is not None else DEFAULT_RING_COVERS[label],
                d_inner_mm=d_in,
                d_outer_mm=d_out,
                height_mm=height_mm,
                axial_center_mm=DEFAULT_RING_CENTERS_MM[label],
            )
        )
    return tuple(rings)


def validate_actuator_in_rectum(actuator: ActuatorSpec, rectum: RectumSpec) -> None:
    """Check the ring's axial span fits on the rectum body."""
    lo, hi = actuator.span_mm
    if lo < 0.0 or hi > rectum.length_mm:
        raise ValueError(
            f"ring {actuator.label.value} span [{lo}, {hi}] mm exceeds "
            f"rectum length {rectum.length_mm} mm"
        )
