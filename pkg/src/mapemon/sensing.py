"""Sensors, instrumentation hooks and the subject side of the observer wiring.

A sensor owns exactly one property. Time-triggered sensors sample whenever
``now % period == 0``, event-triggered sensors read on every tick but only
publish readings that break their threshold, and on-demand sensors are
polled explicitly by the controller.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Callable, Optional, Protocol, Union

from mapemon.errors import (
    AlreadyAttachedError,
    InactiveSensorError,
    InstrumentationError,
    NotAttachedError,
)
from mapemon.properties import Measurement, PropertyId, Threshold, check_threshold


@dataclass(frozen=True)
class TimeTriggered:
    period: int

    def __post_init__(self):
        if not isinstance(self.period, int) or self.period < 1:
            raise ValueError(f"time-triggered period must be an integer >= 1, got {self.period!r}")


@dataclass(frozen=True)
class EventTriggered:
    pass


@dataclass(frozen=True)
class OnDemand:
    pass


TriggerMode = Union[TimeTriggered, EventTriggered, OnDemand]


class SensorStatus(enum.Enum):
    ACTIVE = "active"
    INACTIVE = "inactive"


@dataclass(frozen=True)
class SensorDescriptor:
    sensor_id: str
    property: PropertyId
    mode: TriggerMode
    status: SensorStatus = SensorStatus.ACTIVE


@dataclass(frozen=True)
class InstrumentationHook:
    """Binds one property to a callable returning its value at a given tick."""

    property: PropertyId
    read: Callable[[int], float]


class GaugeSource(Protocol):
    def has_gauge(self, pid: PropertyId) -> bool: ...

    def value_at(self, pid: PropertyId, tick: int) -> float: ...


def instrument(pid: PropertyId, source: GaugeSource) -> InstrumentationHook:
    if not source.has_gauge(pid):
        raise InstrumentationError(f"managed system exposes no gauge for {pid}")

    def read(tick: int) -> float:
        return source.value_at(pid, tick)

    return InstrumentationHook(pid, read)


def poll(sensor: SensorDescriptor, hook: InstrumentationHook, now: int) -> Measurement:
    if sensor.status is not SensorStatus.ACTIVE:
        raise InactiveSensorError(f"sensor {sensor.sensor_id!r} is inactive")
    return Measurement(sensor.property, hook.read(now), now, sensor.sensor_id)


def due(sensor: SensorDescriptor, now: int) -> bool:
    """Whether the sampling schedule fires at ``now``.

    Only time-triggered sensors have a schedule; event-triggered sensors are
    evaluated every tick through :meth:`Sensor.emit_if_violation` instead.
    """
    if isinstance(sensor.mode, TimeTriggered):
        return now % sensor.mode.period == 0
    return False


class Observer(Protocol):
    def on_measurement(self, m: Measurement) -> None: ...


class Sensor:
    """A deployed sensor: descriptor, hook, attached observers and read history."""

    def __init__(self, descriptor: SensorDescriptor, hook: InstrumentationHook):
        if descriptor.property != hook.property:
            raise InstrumentationError(
                f"sensor {descriptor.sensor_id!r} watches {descriptor.property} but hook reads {hook.property}"
            )
        self.descriptor = descriptor
        self.hook = hook
        self.previous: Optional[float] = None
        self._observers: list[Observer] = []

    def __repr__(self):
        return f"Sensor({self.sensor_id!r}, {self.descriptor.mode}, {self.status.value})"

    @property
    def sensor_id(self) -> str:
        return self.descriptor.sensor_id

    @property
    def mode(self) -> TriggerMode:
        return self.descriptor.mode

    @property
    def status(self) -> SensorStatus:
        return self.descriptor.status

    @property
    def active(self) -> bool:
        return self.descriptor.status is SensorStatus.ACTIVE

    def set_status(self, status: SensorStatus) -> None:
        if status is not self.status:
            self.descriptor = replace(self.descriptor, status=status)
        if status is SensorStatus.INACTIVE:
            self.previous = None

    def set_mode(self, mode: TriggerMode) -> None:
        self.descriptor = replace(self.descriptor, mode=mode)

    # subject side

    def attach(self, observer: Observer) -> None:
        if any(o is observer for o in self._observers):
            raise AlreadyAttachedError(f"observer already attached to sensor {self.sensor_id!r}")
        self._observers.append(observer)

    def detach(self, observer: Observer) -> None:
        for i, o in enumerate(self._observers):
            if o is observer:
                del self._observers[i]
                return
        raise NotAttachedError(f"observer not attached to sensor {self.sensor_id!r}")

    @property
    def observers(self) -> tuple[Observer, ...]:
        return tuple(self._observers)

    def notify(self, m: Measurement) -> None:
        # snapshot so an observer detaching itself mid-delivery does not skip the next one
        for o in list(self._observers):
            o.on_measurement(m)

    # sampling

    def due(self, now: int) -> bool:
        return due(self.descriptor, now)

    def poll(self, now: int) -> Measurement:
        m = poll(self.descriptor, self.hook, now)
        self.previous = m.value
        return m

    def emit_if_violation(self, threshold: Threshold, now: int) -> Optional[Measurement]:
        """Read the property and return the reading only if it violates ``threshold``.

        The baseline for relative change is the value read on the previous
        evaluation, whether or not that reading was emitted.
        """
        if not isinstance(self.mode, EventTriggered):
            raise ValueError(f"sensor {self.sensor_id!r} is not event-triggered")
        m = poll(self.descriptor, self.hook, now)
        previous, self.previous = self.previous, m.value
        if check_threshold(threshold, previous, m.value):
            return m
        return None

    # defined last: the name shadows the builtin for the rest of the class body
    @property
    def property(self) -> PropertyId:
        return self.descriptor.property


def attach(subject: Sensor, observer: Observer) -> None:
    subject.attach(observer)


def detach(subject: Sensor, observer: Observer) -> None:
    subject.detach(observer)


def notify(subject: Sensor, m: Measurement) -> None:
    subject.notify(m)
