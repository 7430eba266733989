"""Deterministic managed-system simulator.

The managed system is described as domain -> tasks -> services (each owning
named gauges) -> composites. A scenario script gives every gauge a baseline,
a noise amplitude, and a list of injected step/ramp/spike events.

Gauge values are a pure function of ``(script, gauge, tick)``: noise for tick
``t`` is the ``t``-th output of a SplitMix64 stream seeded from the scenario
seed and an FNV-1a hash of the gauge name, so any tick can be read in any
order and traces are identical across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from mapemon.errors import BuildError, EndOfScenarioError, UnknownGaugeError
from mapemon.properties import PropertyId

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64_mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64: the state advances by the golden gamma, output is the mixed state."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return splitmix64_mix(self.state)

    @staticmethod
    def nth(seed: int, n: int) -> int:
        """The ``n``-th output (1-based) without advancing through the earlier ones."""
        return splitmix64_mix((seed + n * GOLDEN_GAMMA) & MASK64)


def to_unit(x: int) -> float:
    """Map a 64-bit output to [0, 1) using its top 53 bits."""
    return (x >> 11) * (1.0 / (1 << 53))


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for b in text.encode("utf-8"):
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


def stream_seed(seed: int, gauge_name: str) -> int:
    return splitmix64_mix((seed & MASK64) ^ fnv1a64(gauge_name))


# managed-system model


@dataclass(frozen=True)
class Service:
    name: str
    gauges: tuple[PropertyId, ...] = ()


@dataclass(frozen=True)
class Composite:
    member_services: tuple[str, ...]


@dataclass(frozen=True)
class Task:
    name: str
    services: tuple[Service, ...]
    composite: Composite


@dataclass(frozen=True)
class DomainModel:
    domain_name: str
    tasks: tuple[Task, ...]

    def __post_init__(self):
        seen: dict[str, PropertyId] = {}
        for task in self.tasks:
            names = {s.name for s in task.services}
            if not task.composite.member_services:
                raise BuildError(f"task {task.name!r}: composite has no members")
            for member in task.composite.member_services:
                if member not in names:
                    raise BuildError(f"task {task.name!r}: composite member {member!r} is not a service of the task")
            for svc in task.services:
                for g in svc.gauges:
                    if g.component != svc.name:
                        raise BuildError(f"gauge {g} is declared under service {svc.name!r}")
                    if g.name in seen:
                        raise BuildError(f"gauge name {g.name!r} declared twice")
                    seen[g.name] = g

    def gauges(self) -> dict[str, PropertyId]:
        return {g.name: g for t in self.tasks for s in t.services for g in s.gauges}


# scenario script


@dataclass(frozen=True)
class StepTo:
    value: float


@dataclass(frozen=True)
class RampTo:
    value: float
    over_ticks: int

    def __post_init__(self):
        if self.over_ticks < 1:
            raise ValueError("ramp over_ticks must be >= 1")


@dataclass(frozen=True)
class SpikeTo:
    value: float
    width_ticks: int

    def __post_init__(self):
        if self.width_ticks < 1:
            raise ValueError("spike width_ticks must be >= 1")


Effect = Union[StepTo, RampTo, SpikeTo]


@dataclass(frozen=True)
class ScriptedEvent:
    tick: int
    gauge: str
    effect: Effect


def domain_event(gauge: str, tick: int, raised: bool = True) -> ScriptedEvent:
    """A discrete domain event (e.g. out of stock) encoded as a 0/1 step on ``gauge``."""
    return ScriptedEvent(tick, gauge, StepTo(1.0 if raised else 0.0))


@dataclass(frozen=True)
class GaugeProfile:
    baseline: float = 0.0
    noise_amplitude: float = 0.0

    def __post_init__(self):
        if self.noise_amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    duration: int
    gauges: dict[str, GaugeProfile] = field(default_factory=dict)
    events: tuple[ScriptedEvent, ...] = ()

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be >= 0")
        for ev in self.events:
            if not 0 <= ev.tick < self.duration:
                raise ValueError(f"event on {ev.gauge!r} at tick {ev.tick} is outside [0, {self.duration})")

    def profile(self, gauge: str) -> GaugeProfile:
        return self.gauges.get(gauge, GaugeProfile())


class _GaugeTrack:
    """Piecewise level function of one gauge plus its noise stream."""

    def __init__(self, name: str, profile: GaugeProfile, events: list[ScriptedEvent], seed: int):
        self.profile = profile
        self.seed = stream_seed(seed, name)
        self.events: list[tuple[ScriptedEvent, float]] = []
        for ev in events:
            # a ramp starts from whatever the earlier-scripted events put there
            self.events.append((ev, self.level(ev.tick)))

    def level(self, t: int) -> float:
        for ev, start in reversed(self.events):
            eff = ev.effect
            if t < ev.tick:
                continue
            if isinstance(eff, StepTo):
                return float(eff.value)
            if isinstance(eff, SpikeTo):
                if t < ev.tick + eff.width_ticks:
                    return float(eff.value)
                continue
            if t >= ev.tick + eff.over_ticks:
                return float(eff.value)
            return start + (eff.value - start) * (t - ev.tick) / eff.over_ticks
        return float(self.profile.baseline)

    def noise(self, t: int) -> float:
        a = self.profile.noise_amplitude
        if t == 0 or a == 0:
            return 0.0
        return a * (2.0 * to_unit(SplitMix64.nth(self.seed, t)) - 1.0)

    def value(self, t: int) -> float:
        return self.level(t) + self.noise(t)


class Simulator:
    def __init__(self, domain: DomainModel, script: ScenarioScript):
        self.domain = domain
        self.script = script
        self._gauges = domain.gauges()
        for name in script.gauges:
            if name not in self._gauges:
                raise BuildError(f"scenario profile for unknown gauge {name!r}")
        for ev in script.events:
            if ev.gauge not in self._gauges:
                raise BuildError(f"scenario event references unknown gauge {ev.gauge!r}")
        self._tracks = {
            name: _GaugeTrack(name, script.profile(name), [e for e in script.events if e.gauge == name], script.seed)
            for name in sorted(self._gauges)
        }
        self.now = 0

    @property
    def duration(self) -> int:
        return self.script.duration

    @property
    def gauge_ids(self) -> list[PropertyId]:
        return sorted(self._gauges.values())

    def gauge_id(self, name: str) -> PropertyId:
        try:
            return self._gauges[name]
        except KeyError:
            raise UnknownGaugeError(f"unknown gauge {name!r}") from None

    def has_gauge(self, pid: PropertyId) -> bool:
        return self._gauges.get(pid.name) == pid

    def _track(self, pid: PropertyId) -> _GaugeTrack:
        if not self.has_gauge(pid):
            raise UnknownGaugeError(f"unknown gauge {pid}")
        return self._tracks[pid.name]

    def step(self) -> int:
        if self.now >= self.script.duration:
            raise EndOfScenarioError(f"scenario ends at tick {self.script.duration}")
        self.now += 1
        return self.now

    def value_at(self, pid: PropertyId, tick: int) -> float:
        if not 0 <= tick <= self.script.duration:
            raise EndOfScenarioError(f"tick {tick} outside scenario [0, {self.script.duration}]")
        return self._track(pid).value(tick)

    def read_gauge(self, pid: PropertyId) -> float:
        return self.value_at(pid, self.now)

    def trace(self, pid: PropertyId, ticks: Optional[Iterable[int]] = None) -> list[float]:
        """Values of one gauge over ``ticks`` (default: the whole scenario)."""
        track = self._track(pid)
        if ticks is None:
            ticks = range(self.script.duration + 1)
        return [track.value(t) for t in ticks]


def build(domain: DomainModel, script: ScenarioScript) -> Simulator:
    return Simulator(domain, script)
