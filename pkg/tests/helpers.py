"""Programmatic scenario builders shared by the tests (no config parsing involved)."""

from __future__ import annotations

from typing import Optional, Sequence

from mapemon.config import RunConfig
from mapemon.monitor import EventTriggeredMode, MonitoringMode, PeriodicMode
from mapemon.properties import PropertyId, PropertyKind, PropertySpec, Threshold, Violation
from mapemon.sensing import EventTriggered, SensorDescriptor, TimeTriggered
from mapemon.sim import (
    Composite,
    DomainModel,
    GaugeProfile,
    ScenarioScript,
    ScriptedEvent,
    Service,
    SpikeTo,
    StepTo,
    Task,
)

SERVICE = "web"
LOAD = PropertyId("server_load", SERVICE)
RESPONSE = PropertyId("response_time", SERVICE)
BANDWIDTH = PropertyId("bandwidth", SERVICE)
CLIENTS = PropertyId("connected_clients", SERVICE)


def domain(*gauges: PropertyId) -> DomainModel:
    svc = Service(SERVICE, tuple(gauges))
    return DomainModel("shop", (Task("storefront", (svc,), Composite((SERVICE,))),))


def mode_of(text: str) -> MonitoringMode:
    if text == "event":
        return EventTriggeredMode()
    return PeriodicMode(int(text.split(":")[1]))


def load_config(
    duration: int = 100,
    baseline: float = 30.0,
    noise: float = 0.0,
    events: Sequence[ScriptedEvent] = (),
    threshold: Threshold = Threshold(upper=50.0),
    mode: str = "periodic:10",
    trigger: str = "time",
    period: int = 1,
    policy=None,
    seed: int = 1,
) -> RunConfig:
    """One gauge (server_load) watched by one sensor."""
    sensor_mode = EventTriggered() if trigger == "event" else TimeTriggered(period)
    return RunConfig(
        domain=domain(LOAD),
        script=ScenarioScript(seed, duration, {"server_load": GaugeProfile(baseline, noise)}, tuple(events)),
        properties=(PropertySpec(LOAD, PropertyKind.SYSTEM, "percent", threshold, core_metric=True),),
        sensors=(SensorDescriptor("load", LOAD, sensor_mode),),
        mode=mode_of(mode),
        policy=policy,
    )


def three_metric_config(
    duration: int = 200,
    events: Sequence[ScriptedEvent] = (),
    mode: str = "event",
    policy=None,
    seed: int = 3,
    noise: float = 0.0,
) -> RunConfig:
    """server_load (core) plus response_time and bandwidth, all sampled every tick."""
    gauges = (LOAD, RESPONSE, BANDWIDTH)
    return RunConfig(
        domain=domain(*gauges),
        script=ScenarioScript(
            seed,
            duration,
            {
                "server_load": GaugeProfile(30.0, noise),
                "response_time": GaugeProfile(120.0, noise),
                "bandwidth": GaugeProfile(40.0, noise),
            },
            tuple(events),
        ),
        properties=(
            PropertySpec(LOAD, PropertyKind.SYSTEM, "percent", Threshold(upper=50.0), core_metric=True),
            PropertySpec(RESPONSE, PropertyKind.SYSTEM, "ms", Threshold(upper=400.0)),
            PropertySpec(BANDWIDTH, PropertyKind.SYSTEM, "Mbit/s", Threshold(upper=90.0)),
        ),
        sensors=(
            SensorDescriptor("s_bandwidth", BANDWIDTH, TimeTriggered(1)),
            SensorDescriptor("s_load", LOAD, TimeTriggered(1)),
            SensorDescriptor("s_response", RESPONSE, TimeTriggered(1)),
        ),
        mode=mode_of(mode),
        policy=policy,
    )


def spike(tick: int, value: float = 80.0, width: int = 10) -> ScriptedEvent:
    return ScriptedEvent(tick, "server_load", SpikeTo(value, width))


def step(tick: int, value: float, gauge: str = "server_load") -> ScriptedEvent:
    return ScriptedEvent(tick, gauge, StepTo(value))


def replay_violation_ticks(values: Sequence[float], threshold: Threshold, ticks: Optional[Sequence[int]] = None) -> list[int]:
    """Offline oracle: ticks at which consecutive samples break ``threshold``.

    ``ticks`` are the sample ticks (default every tick); the baseline for the
    relative clause is the preceding sample.
    """
    if ticks is None:
        ticks = range(len(values))
    out, prev = [], None
    for t in ticks:
        v = values[t]
        if brute_violations(threshold, prev, v):
            out.append(t)
        prev = v
    return out


def brute_violations(threshold: Threshold, previous: Optional[float], value: float) -> list[Violation]:
    """Clause-by-clause reference evaluator, written without the library code path."""
    clauses = {
        Violation.LOWER: lambda: threshold.lower is not None and value < threshold.lower,
        Violation.UPPER: lambda: threshold.upper is not None and value > threshold.upper,
        Violation.RELATIVE_CHANGE: lambda: (
            threshold.relative_change_pct is not None
            and previous not in (None, 0.0)
            and 100.0 * abs(value - previous) / abs(previous) > threshold.relative_change_pct
        ),
    }
    hits = {kind for kind, clause in clauses.items() if clause()}
    return [kind for kind in (Violation.LOWER, Violation.UPPER, Violation.RELATIVE_CHANGE) if kind in hits]
