"""Compile declarative valve patterns into per-ring open/close timelines.

Two stock patterns drive the rings proximal-to-distal (A1 -> A2 -> A3):

* pattern-1: staggered onset with cumulative hold. Per cycle of length
  3*t_on + t_off, A1 opens at 0, A2 at t_on, A3 at 2*t_on and all three
  release together at 3*t_on, so the hold durations are 3t, 2t, t.
* pattern-2: strictly sequential pulses. Each ring holds alone for t_on,
  followed by t_off of rest; the cycle is 3*(t_on + t_off) long and at most
  one valve is ever open.

Custom timelines cover everything else, including the equal-hold sequential
variant provided by :func:`pattern1_literal`.
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .geometry import Label


class PatternKind(str, Enum):
    PATTERN1 = "pattern1"
    PATTERN2 = "pattern2"
    CUSTOM = "custom"


@dataclass(frozen=True)
class PatternSpec:
    """Declarative description of a control pattern."""

    kind: PatternKind
    t_on_s: float = 1.0
    t_off_s: float = 1.0
    n_cycles: int = 1
    custom_timeline: tuple[tuple[float, Label, bool], ...] | None = None
    custom_duration_s: float | None = None

    def __post_init__(self):
        if self.t_on_s <= 0.0:
            raise ValueError("t_on must be positive")
        if self.t_off_s < 0.0:
            raise ValueError("t_off cannot be negative")
        if self.n_cycles < 1:
            raise ValueError("need at least one cycle")
        if self.kind is PatternKind.CUSTOM and self.custom_timeline is None:
            raise ValueError("custom pattern needs an explicit timeline")


@dataclass(frozen=True)
class ValveSchedule:
    """Compiled per-ring event lists; events are (time_s, open) pairs."""

    events: dict[Label, tuple[tuple[float, bool], ...]]
    total_duration_s: float

    def __post_init__(self):
        if self.total_duration_s <= 0.0:
            raise ValueError("schedule duration must be positive")
        for label in Label:
            if label not in self.events:
                raise ValueError(f"schedule missing event list for {label.value}")
        for label, events in self.events.items():
            expect_open = True
            last_t = -1.0
            for t, state in events:
                if t < 0.0:
                    raise ValueError(f"{label.value}: event before time 0")
                if t < last_t:
                    raise ValueError(f"{label.value}: events not time-sorted")
                if state is not expect_open:
                    raise ValueError(
                        f"{label.value}: events must alternate open/close"
                    )
                expect_open = not expect_open
                last_t = t
            if not expect_open:
                raise ValueError(f"{label.value}: valve left open at schedule end")
            if events and events[-1][0] > self.total_duration_s:
                raise ValueError(f"{label.value}: event past schedule end")

    def first_open_time_s(self) -> float | None:
        """Earliest valve opening, or None for an all-closed schedule."""
        opens = [ev[0][0] for ev in self.events.values() if ev]
        return min(opens) if opens else None


def build_pattern1(t_on_s: float, t_off_s: float, n_cycles: int) -> ValveSchedule:
    """Staggered-onset, cumulative-hold cycle (holds 3t, 2t, t; joint release)."""
    spec = PatternSpec(PatternKind.PATTERN1, t_on_s, t_off_s, n_cycles)
    cycle = 3.0 * spec.t_on_s + spec.t_off_s
    events: dict[Label, list[tuple[float, bool]]] = {label: [] for label in Label}
    for k in range(spec.n_cycles):
        base = k * cycle
        release = base + 3.0 * spec.t_on_s
        events[Label.A1] += [(base, True), (release, False)]
        events[Label.A2] += [(base + spec.t_on_s, True), (release, False)]
        events[Label.A3] += [(base + 2.0 * spec.t_on_s, True), (release, False)]
    return ValveSchedule(
        events={label: tuple(ev) for label, ev in events.items()},
        total_duration_s=spec.n_cycles * cycle,
    )


def build_pattern2(t_on_s: float, t_off_s: float, n_cycles: int) -> ValveSchedule:
    """Strictly sequential pulses; never more than one valve open."""
    spec = PatternSpec(PatternKind.PATTERN2, t_on_s, t_off_s, n_cycles)
    slot = spec.t_on_s + spec.t_off_s
    cycle = 3.0 * slot
    events: dict[Label, list[tuple[float, bool]]] = {label: [] for label in Label}
    for k in range(spec.n_cycles):
        base = k * cycle
        for i, label in enumerate(Label):
            start = base + i * slot
            events[label] += [(start, True), (start + spec.t_on_s, False)]
    return ValveSchedule(
        events={label: tuple(ev) for label, ev in events.items()},
        total_duration_s=spec.n_cycles * cycle,
    )


def pattern1_literal(
    t_on_s: float = 3.0, t_off_s: float = 1.0, n_cycles: int = 1
) -> PatternSpec:
    """Equal-hold sequential reading of pattern-1 (each ring ON for t_on in turn).

    Provided as a custom preset for comparison with the default staggered
    encoding of :func:`build_pattern1`.
    """
    timeline: list[tuple[float, Label, bool]] = []
    cycle = 3.0 * t_on_s + t_off_s
    for k in range(n_cycles):
        base = k * cycle
        for i, label in enumerate(Label):
            timeline.append((base + i * t_on_s, label, True))
            timeline.append((base + (i + 1) * t_on_s, label, False))
    return PatternSpec(
        kind=PatternKind.CUSTOM,
        t_on_s=t_on_s,
        t_off_s=t_off_s,
        n_cycles=n_cycles,
        custom_timeline=tuple(timeline),
        custom_duration_s=n_cycles * cycle,
    )


def compile_pattern(spec: PatternSpec) -> ValveSchedule:
    """Turn a PatternSpec into its ValveSchedule."""
    if spec.kind is PatternKind.PATTERN1:
        return build_pattern1(spec.t_on_s, spec.t_off_s, spec.n_cycles)
    if spec.kind is PatternKind.PATTERN2:
        return build_pattern2(spec.t_on_s, spec.t_off_s, spec.n_cycles)
    events: dict[Label, list[tuple[float, bool]]] = {label: [] for label in Label}
    for t, label, state in spec.custom_timeline:
        events[Label(label)].append((float(t), bool(state)))
    for label in events:
        events[label].sort(key=lambda ev: ev[0])
    max_t = max((t for t, _, _ in spec.custom_timeline), default=0.0)
    duration = spec.custom_duration_s if spec.custom_duration_s is not None else max_t
    return ValveSchedule(
        events={label: tuple(ev) for label, ev in events.items()},
        total_duration_s=duration,
    )


def valve_state_at(schedule: ValveSchedule, time_s: float) -> dict[Label, bool]:
    """Valve states at a time point: the last event at or before it wins."""
    if time_s < 0.0 or time_s > schedule.total_duration_s:
        raise ValueError(
            f"time {time_s} s outside schedule [0, {schedule.total_duration_s}] s"
        )
    states = {}
    for label, events in schedule.events.items():
        times = [t for t, _ in events]
        idx = bisect_right(times, time_s)
        states[label] = events[idx - 1][1] if idx > 0 else False
    return states


def load_timeline_csv(path: str | Path) -> PatternSpec:
    """Read a custom timeline CSV with columns time_s,label,open (open is 0/1)."""
    timeline = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != (
            "time_s",
            "label",
            "open",
        ):
            raise ValueError("timeline CSV must have columns time_s,label,open")
        for record in reader:
            timeline.append(
                (
                    float(record["time_s"]),
                    Label(record["label"]),
                    record["open"].strip() == "1",
                )
            )
    return PatternSpec(kind=PatternKind.CUSTOM, custom_timeline=tuple(timeline))
