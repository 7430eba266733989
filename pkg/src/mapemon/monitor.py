"""The monitoring controller.

It deploys and tracks sensors, observes their measurements, keeps the
composed system state, detects threshold violations and writes entries to
the knowledge log according to the monitoring mode:

* ``PeriodicMode(p)``: a passive monitor. A snapshot is logged whenever
  ``now % p == 0``; violations seen in between wait for the next snapshot.
* ``EventTriggeredMode()``: an active monitor. An entry is logged only on
  ticks where at least one violation is pending.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from mapemon.errors import (
    ConfigurationError,
    DuplicateSensorError,
    SchedulerError,
    UnknownSensorError,
)
from mapemon.knowledge import KnowledgeLog, LogCause
from mapemon.properties import (
    Measurement,
    PropertyId,
    PropertySpec,
    SystemState,
    Violation,
    ViolationEvent,
    check_threshold,
)
from mapemon.sensing import (
    EventTriggered,
    GaugeSource,
    InstrumentationHook,
    Sensor,
    SensorDescriptor,
    SensorStatus,
    TimeTriggered,
    instrument,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeriodicMode:
    log_period: int

    code = 0

    def __post_init__(self):
        if not isinstance(self.log_period, int) or self.log_period < 1:
            raise ValueError(f"log period must be an integer >= 1, got {self.log_period!r}")

    def __str__(self):
        return f"periodic:{self.log_period}"


@dataclass(frozen=True)
class EventTriggeredMode:
    code = 1

    def __str__(self):
        return "event"


MonitoringMode = Union[PeriodicMode, EventTriggeredMode]


def mode_from_code(code: int, log_period: Optional[int] = None) -> MonitoringMode:
    """Map the integer mode codes (0 periodic, 1 event-triggered) to a mode."""
    if code == 0:
        if log_period is None:
            raise ValueError("periodic mode needs a log period")
        return PeriodicMode(log_period)
    if code == 1:
        return EventTriggeredMode()
    raise ValueError(f"unknown monitoring mode code {code!r}")


def parse_mode(text: str) -> MonitoringMode:
    """Parse ``event`` or ``periodic:<p>``."""
    text = text.strip().lower()
    if text in ("event", "event-triggered"):
        return EventTriggeredMode()
    kind, _, period = text.partition(":")
    if kind == "periodic" and period:
        try:
            p = int(period)
        except ValueError:
            raise ValueError(f"bad log period in mode {text!r}") from None
        return PeriodicMode(p)
    raise ValueError(f"mode must be 'event' or 'periodic:<p>', got {text!r}")


@dataclass(frozen=True)
class ControllerConfig:
    mode: MonitoringMode
    properties: tuple[PropertySpec, ...]
    sensors: tuple[SensorDescriptor, ...] = field(default=())

    def __post_init__(self):
        ids = [p.id for p in self.properties]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ConfigurationError(f"property {dup} declared twice")
        sids = [s.sensor_id for s in self.sensors]
        if len(set(sids)) != len(sids):
            dup = next(i for i in sids if sids.count(i) > 1)
            raise DuplicateSensorError(f"sensor id {dup!r} declared twice")
        declared = set(ids)
        for s in self.sensors:
            if s.property not in declared:
                raise ConfigurationError(f"sensor {s.sensor_id!r} references undeclared property {s.property}")
        watched = {s.property for s in self.sensors}
        for pid in ids:
            if pid not in watched:
                raise ConfigurationError(f"property {pid} has no sensor")


class MonitoringController:
    def __init__(self, properties: Iterable[PropertySpec], mode: MonitoringMode, knowledge: Optional[KnowledgeLog] = None):
        self.specs: dict[PropertyId, PropertySpec] = {}
        for p in properties:
            if p.id in self.specs:
                raise ConfigurationError(f"property {p.id} declared twice")
            self.specs[p.id] = p
        self.mode: MonitoringMode = mode
        self.log = knowledge if knowledge is not None else KnowledgeLog()
        self.current = SystemState()
        # relative-change baselines, one per sensor
        self.previous_values: dict[str, float] = {}
        self.pending_events: list[ViolationEvent] = []
        self.events_detected: list[ViolationEvent] = []
        self.dropped = 0
        self.measurements_taken = 0
        self.last_tick_reads = 0
        self.last_tick: Optional[int] = None
        self._sensors: dict[str, Sensor] = {}
        self._order: list[str] = []

    @classmethod
    def from_config(cls, config: ControllerConfig, source: GaugeSource, knowledge: Optional[KnowledgeLog] = None) -> MonitoringController:
        ctl = cls(config.properties, config.mode, knowledge)
        for desc in config.sensors:
            ctl.deploy_sensor(desc, instrument(desc.property, source))
        return ctl

    # IMonitor surface

    def set_monitoring_mode(self, mode: MonitoringMode) -> None:
        if not isinstance(mode, (PeriodicMode, EventTriggeredMode)):
            raise TypeError(f"not a monitoring mode: {mode!r}")
        self.mode = mode

    def set_system_state(self, state: SystemState) -> None:
        for pid in state.entries:
            if pid not in self.specs:
                raise ConfigurationError(f"system state holds undeclared property {pid}")
        self.current = state

    # sensor registry

    def deploy_sensor(self, desc: SensorDescriptor, hook: InstrumentationHook) -> str:
        if desc.sensor_id in self._sensors:
            raise DuplicateSensorError(f"sensor id {desc.sensor_id!r} already deployed")
        if desc.property not in self.specs:
            raise ConfigurationError(f"sensor {desc.sensor_id!r} watches undeclared property {desc.property}")
        sensor = Sensor(desc, hook)
        sensor.set_status(SensorStatus.ACTIVE)
        sensor.attach(self)
        self._sensors[desc.sensor_id] = sensor
        self._order = sorted(self._sensors)
        return desc.sensor_id

    def sensor(self, sensor_id: str) -> Sensor:
        try:
            return self._sensors[sensor_id]
        except KeyError:
            raise UnknownSensorError(f"no sensor {sensor_id!r}") from None

    @property
    def sensors(self) -> dict[str, Sensor]:
        return dict(self._sensors)

    def sensor_status(self, sensor_id: str) -> SensorStatus:
        return self.sensor(sensor_id).status

    def retire_sensor(self, sensor_id: str) -> None:
        sensor = self.sensor(sensor_id)
        if not sensor.active:
            return
        sensor.set_status(SensorStatus.INACTIVE)
        if self in sensor.observers:
            sensor.detach(self)
        self.previous_values.pop(sensor_id, None)
        if sensor.property not in self.active_properties():
            self.current, _ = self.current.remove(sensor.property)

    def activate_sensor(self, sensor_id: str) -> None:
        sensor = self.sensor(sensor_id)
        if sensor.active:
            return
        sensor.set_status(SensorStatus.ACTIVE)
        sensor.attach(self)

    def set_sensor_period(self, sensor_id: str, period: int) -> None:
        sensor = self.sensor(sensor_id)
        if not isinstance(sensor.mode, TimeTriggered):
            raise ValueError(f"sensor {sensor_id!r} is not time-triggered")
        if sensor.mode.period != period:
            sensor.set_mode(TimeTriggered(period))

    def active_properties(self) -> set[PropertyId]:
        return {s.property for s in self._sensors.values() if s.active}

    # observer side

    def on_measurement(self, m: Measurement) -> None:
        spec = self.specs.get(m.property)
        if spec is None:
            self.dropped += 1
            log.debug("dropped measurement of undeclared property %s", m.property)
            return
        self.current = self.current.add(m)
        baseline = self.previous_values.get(m.sensor_id)
        for kind in check_threshold(spec.threshold, baseline, m.value):
            ref = baseline if kind is Violation.RELATIVE_CHANGE else None
            ev = ViolationEvent(m.property, kind, m.value, m.tick, ref)
            self.pending_events.append(ev)
            self.events_detected.append(ev)
        self.previous_values[m.sensor_id] = m.value

    # scheduling

    def tick(self, now: int) -> None:
        if now < 0 or (self.last_tick is not None and now <= self.last_tick):
            raise SchedulerError(f"tick {now} does not advance past {self.last_tick}")
        self.last_tick = now
        self.current = SystemState(self.current.entries, now)

        reads = 0
        for sid in self._order:
            sensor = self._sensors[sid]
            if not sensor.active:
                continue
            if isinstance(sensor.mode, TimeTriggered):
                if sensor.due(now):
                    m = sensor.poll(now)
                    reads += 1
                    sensor.notify(m)
            elif isinstance(sensor.mode, EventTriggered):
                self._sync_baseline(sensor)
                m = sensor.emit_if_violation(self.specs[sensor.property].threshold, now)
                reads += 1
                if m is not None:
                    sensor.notify(m)
                self._sync_baseline(sensor)
        self.last_tick_reads = reads
        self.measurements_taken += reads

        if isinstance(self.mode, PeriodicMode):
            if now % self.mode.log_period == 0:
                self._write(LogCause.PERIODIC_TICK, now, reads)
        elif self.pending_events:
            self._write(LogCause.VIOLATION, now, reads)

    def poll_on_demand(self, sensor_id: str) -> Measurement:
        """Poll one sensor at the current tick, outside its schedule."""
        sensor = self.sensor(sensor_id)
        now = self.last_tick if self.last_tick is not None else 0
        m = sensor.poll(now)
        self.measurements_taken += 1
        sensor.notify(m)
        return m

    def finish(self) -> None:
        """Flush violations still waiting for a periodic snapshot."""
        if self.pending_events:
            now = self.last_tick if self.last_tick is not None else 0
            self._write(LogCause.VIOLATION, now, 0)

    def _sync_baseline(self, sensor: Sensor) -> None:
        if sensor.previous is None:
            self.previous_values.pop(sensor.sensor_id, None)
        else:
            self.previous_values[sensor.sensor_id] = sensor.previous

    def _write(self, cause: LogCause, now: int, reads: int) -> None:
        events, self.pending_events = self.pending_events, []
        self.log.log(SystemState(self.current.entries, now), events, cause, now, reads)
