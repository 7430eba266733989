"""Property, threshold, measurement and system-state value types.

Everything here is immutable. Threshold evaluation and state composition are
pure functions so they can be shared freely between the sensors, the
controller and offline replay oracles in the tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

from mapemon.errors import CompositionError


class PropertyKind(enum.Enum):
    SYSTEM = "system"
    ENVIRONMENT = "environment"


class QosPurpose(enum.Enum):
    SELF_HEALING = "self-healing"
    SELF_PROTECTING = "self-protecting"
    SELF_OPTIMIZING = "self-optimizing"
    SELF_CONFIGURING = "self-configuring"


class Violation(enum.Enum):
    # definition order is the reporting order of check_threshold
    LOWER = "lower"
    UPPER = "upper"
    RELATIVE_CHANGE = "relative-change"


@dataclass(frozen=True, order=True)
class PropertyId:
    """Qualified identity of a monitored property.

    ``component`` names the owning service and ``operation`` the method the
    value is attached to; simulator gauges leave ``operation`` empty.
    """

    name: str
    component: str
    operation: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValueError("property name must be non-empty")

    def __str__(self) -> str:
        s = f"{self.component}/{self.name}"
        return f"{s}:{self.operation}" if self.operation else s


@dataclass(frozen=True)
class Threshold:
    lower: Optional[float] = None
    upper: Optional[float] = None
    relative_change_pct: Optional[float] = None

    def __post_init__(self):
        if self.lower is None and self.upper is None and self.relative_change_pct is None:
            raise ValueError("threshold needs at least one of lower, upper, relative_change_pct")
        if self.lower is not None and self.upper is not None and not self.lower < self.upper:
            raise ValueError(f"threshold lower ({self.lower}) must be below upper ({self.upper})")
        if self.relative_change_pct is not None and not self.relative_change_pct > 0:
            raise ValueError("relative_change_pct must be > 0")

    def kinds(self) -> frozenset[Violation]:
        """Violation kinds this threshold is able to report."""
        out = set()
        if self.lower is not None:
            out.add(Violation.LOWER)
        if self.upper is not None:
            out.add(Violation.UPPER)
        if self.relative_change_pct is not None:
            out.add(Violation.RELATIVE_CHANGE)
        return frozenset(out)


@dataclass(frozen=True)
class PropertySpec:
    id: PropertyId
    kind: PropertyKind
    unit: str
    threshold: Threshold
    qos_purpose: QosPurpose = QosPurpose.SELF_OPTIMIZING
    core_metric: bool = False

    def __post_init__(self):
        if not self.unit:
            raise ValueError(f"{self.id}: unit must be non-empty")


@dataclass(frozen=True)
class Measurement:
    property: PropertyId
    value: float
    tick: int
    sensor_id: str

    def __post_init__(self):
        if self.tick < 0:
            raise ValueError("measurement tick must be non-negative")


@dataclass(frozen=True)
class ViolationEvent:
    property: PropertyId
    violation: Violation
    observed: float
    tick: int
    reference: Optional[float] = None


def check_threshold(threshold: Threshold, previous: Optional[float], value: float) -> list[Violation]:
    """Return the violated clauses of ``threshold``, ordered lower, upper, relative.

    Bounds are strict: a value equal to a bound is acceptable. The relative
    clause needs a non-zero baseline and is silent otherwise.
    """
    out = []
    if threshold.lower is not None and value < threshold.lower:
        out.append(Violation.LOWER)
    if threshold.upper is not None and value > threshold.upper:
        out.append(Violation.UPPER)
    pct = threshold.relative_change_pct
    if pct is not None and previous is not None and previous != 0:
        if 100.0 * abs(value - previous) / abs(previous) > pct:
            out.append(Violation.RELATIVE_CHANGE)
    return out


@dataclass(frozen=True)
class SystemState:
    """Snapshot of the latest measurement of each monitored property."""

    entries: Mapping[PropertyId, Measurement] = field(default_factory=dict)
    composed_at: int = 0

    def __post_init__(self):
        entries = dict(self.entries)
        for pid, m in entries.items():
            if m.property != pid:
                raise CompositionError(f"entry keyed {pid} holds a measurement of {m.property}")
            if m.tick > self.composed_at:
                raise CompositionError(
                    f"measurement of {pid} at tick {m.tick} is newer than composed_at={self.composed_at}"
                )
        object.__setattr__(self, "entries", MappingProxyType(entries))

    def __eq__(self, other):
        if not isinstance(other, SystemState):
            return NotImplemented
        return self.composed_at == other.composed_at and dict(self.entries) == dict(other.entries)

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, pid) -> bool:
        return pid in self.entries

    def properties(self) -> list[PropertyId]:
        return sorted(self.entries)

    def get(self, pid: PropertyId) -> Optional[Measurement]:
        return self.entries.get(pid)

    def add(self, m: Measurement) -> SystemState:
        entries = dict(self.entries)
        entries[m.property] = m
        return SystemState(entries, max(self.composed_at, m.tick))

    def remove(self, pid: PropertyId) -> tuple[SystemState, Optional[Measurement]]:
        """Drop ``pid``; the second item is the removed measurement or None when absent."""
        if pid not in self.entries:
            return self, None
        entries = dict(self.entries)
        removed = entries.pop(pid)
        return SystemState(entries, self.composed_at), removed


def compose_state(measurements: Iterable[Measurement], now: int) -> SystemState:
    entries: dict[PropertyId, Measurement] = {}
    for m in measurements:
        if m.property in entries:
            raise CompositionError(f"duplicate measurement for property {m.property}")
        entries[m.property] = m
    return SystemState(entries, now)


def state_add(state: SystemState, m: Measurement) -> SystemState:
    return state.add(m)


def state_remove(state: SystemState, pid: PropertyId) -> tuple[SystemState, Optional[Measurement]]:
    return state.remove(pid)


def state_get(state: SystemState, pid: PropertyId) -> Optional[Measurement]:
    return state.get(pid)
