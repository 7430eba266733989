"""Scenario configuration documents.

A document is a list of sections. A section opens with ``[kind]`` or
``[kind label]`` and holds ``key = value`` lines; ``#`` starts a comment.
Values are integers, reals, strings (optionally double-quoted), booleans or
comma-separated lists, depending on the key.

Section kinds::

    [domain <name>]     tasks
    [task <name>]       services, composite
    [service <name>]    gauges
    [scenario]          seed, duration
    [gauge <name>]      baseline, noise
    [event <label>]     gauge, tick, kind (step|ramp|spike|domain), value, over, width
    [property <label>]  name, component, operation, kind, unit, qos,
                        lower, upper, relative_change_pct, core
    [sensor <id>]       property, trigger (time|event|on-demand), period
    [monitor]           mode (periodic|event|0|1), log_period, output
    [policy]            type (none|frequency|stage|load) plus the chosen policy's keys

Sensors, stage sets and the load policy refer to properties by section label.
Every problem is reported as a :class:`ConfigError` naming the offending
section and key.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Union

from mapemon.adaptive import FrequencyPolicy, LoadProportionalPolicy, StagePolicy
from mapemon.errors import ConfigurationError
from mapemon.monitor import ControllerConfig, EventTriggeredMode, MonitoringMode, mode_from_code
from mapemon.properties import PropertyId, PropertyKind, PropertySpec, QosPurpose, Threshold
from mapemon.sensing import EventTriggered, OnDemand, SensorDescriptor, TimeTriggered
from mapemon.sim import (
    Composite,
    DomainModel,
    GaugeProfile,
    RampTo,
    ScenarioScript,
    ScriptedEvent,
    Service,
    SpikeTo,
    StepTo,
    Task,
    domain_event,
)

Policy = Union[None, FrequencyPolicy, StagePolicy, LoadProportionalPolicy]


class ConfigError(ConfigurationError):
    def __init__(self, message: str, element: str = "", line: Optional[int] = None):
        where = f"line {line}: " if line else ""
        prefix = f"{element}: " if element else ""
        super().__init__(f"{where}{prefix}{message}")
        self.element = element
        self.line = line


class ConfigSyntaxError(ConfigError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (column {column})", "syntax", line)
        self.column = column


class UnknownKeyError(ConfigError):
    pass


class UnknownSectionError(ConfigError):
    pass


class MissingKeyError(ConfigError):
    pass


class DuplicateError(ConfigError):
    pass


class DanglingReferenceError(ConfigError):
    pass


class ConfigInvariantError(ConfigError):
    pass


@dataclass
class Item:
    raw: str
    line: int
    quoted: bool = False


@dataclass
class Section:
    kind: str
    label: Optional[str]
    line: int
    items: dict[str, Item] = field(default_factory=dict)

    @property
    def title(self) -> str:
        return f"[{self.kind} {self.label}]" if self.label else f"[{self.kind}]"


_HEADER = re.compile(r"\[\s*([A-Za-z][\w-]*)(?:\s+([^\s\]]+))?\s*\]")
_KEY = re.compile(r"([A-Za-z_][\w-]*)\s*=")


def tokenize(text: str) -> list[Section]:
    sections: list[Section] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        col0 = len(raw) - len(raw.lstrip()) + 1
        if stripped.startswith("["):
            m = _HEADER.match(stripped)
            if not m:
                raise ConfigSyntaxError("malformed section header", lineno, col0)
            rest = stripped[m.end():].strip()
            if rest and not rest.startswith("#"):
                raise ConfigSyntaxError("unexpected text after section header", lineno, col0 + m.end())
            sections.append(Section(m.group(1).lower(), m.group(2), lineno))
            continue
        m = _KEY.match(stripped)
        if not m:
            raise ConfigSyntaxError("expected 'key = value' or '[section]'", lineno, col0)
        if not sections:
            raise ConfigSyntaxError("key outside of any section", lineno, col0)
        key = m.group(1).lower()
        vstart = m.end()
        value_text = stripped[vstart:].lstrip()
        vcol = col0 + len(stripped) - len(value_text)
        quoted = value_text.startswith('"')
        if quoted:
            end = value_text.find('"', 1)
            if end < 0:
                raise ConfigSyntaxError("unterminated string", lineno, vcol)
            value = value_text[1:end]
            tail = value_text[end + 1:].strip()
            if tail and not tail.startswith("#"):
                raise ConfigSyntaxError("unexpected text after string", lineno, vcol + end + 1)
        else:
            value = re.split(r"\s#", value_text, maxsplit=1)[0].strip()
            if value.startswith("#"):
                value = ""
            if not value:
                raise ConfigSyntaxError(f"missing value for {key!r}", lineno, vcol)
        sec = sections[-1]
        if key in sec.items:
            raise DuplicateError(f"key {key!r} given twice", sec.title, lineno)
        sec.items[key] = Item(value, lineno, quoted)
    return sections


# typed access


def _int(s: str) -> int:
    return int(s, 10)


def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _list(s: str) -> list[str]:
    parts = [p.strip() for p in s.split(",")]
    if any(not p for p in parts):
        raise ValueError(f"empty element in list {s!r}")
    return parts


_TYPE_NAMES = {_int: "integer", float: "real", str: "string", _bool: "boolean", _list: "list"}

SCHEMAS: dict[str, dict[str, Callable]] = {
    "domain": {"tasks": _list},
    "task": {"services": _list, "composite": _list},
    "service": {"gauges": _list},
    "scenario": {"seed": _int, "duration": _int},
    "gauge": {"baseline": float, "noise": float},
    "event": {"gauge": str, "tick": _int, "kind": str, "value": float, "over": _int, "width": _int},
    "property": {
        "name": str,
        "component": str,
        "operation": str,
        "kind": str,
        "unit": str,
        "qos": str,
        "lower": float,
        "upper": float,
        "relative_change_pct": float,
        "core": _bool,
    },
    "sensor": {"property": str, "trigger": str, "period": _int},
    "monitor": {"mode": str, "log_period": _int, "output": str},
    "policy": {
        "type": str,
        "p_min": _int,
        "p_max": _int,
        "decrease_factor": float,
        "increase_factor": float,
        "quiet_windows": _int,
        "initial_period": _int,
        "core": _list,
        "extended": _list,
        "stability_windows": _int,
        "window_ticks": _int,
        "load_property": str,
        "bands": _list,
    },
}
LABELLED = {"domain", "task", "service", "gauge", "event", "property", "sensor"}
SINGLETON = {"domain", "scenario", "monitor", "policy"}
REQUIRED_SECTIONS = ("domain", "scenario", "monitor")


class _Reader:
    """Typed, key-checked view of one section."""

    def __init__(self, sec: Section):
        self.sec = sec
        schema = SCHEMAS[sec.kind]
        for key, item in sec.items.items():
            if key not in schema:
                raise UnknownKeyError(f"unknown key {key!r}", f"{sec.title} {key}", item.line)

    def has(self, key: str) -> bool:
        return key in self.sec.items

    def element(self, key: str) -> str:
        return f"{self.sec.title} {key}"

    def line(self, key: str) -> int:
        item = self.sec.items.get(key)
        return item.line if item else self.sec.line

    def get(self, key: str, default: Any = ...) -> Any:
        item = self.sec.items.get(key)
        if item is None:
            if default is ...:
                raise MissingKeyError(f"required key {key!r} is missing", self.element(key), self.sec.line)
            return default
        conv = SCHEMAS[self.sec.kind][key]
        try:
            return conv(item.raw)
        except ValueError:
            raise ConfigError(
                f"expected {_TYPE_NAMES[conv]}, got {item.raw!r}", self.element(key), item.line
            ) from None

    def invariant(self, key: str, message: str) -> ConfigInvariantError:
        return ConfigInvariantError(message, self.element(key), self.line(key))

    def dangling(self, key: str, message: str) -> DanglingReferenceError:
        return DanglingReferenceError(message, self.element(key), self.line(key))


def _choice(r: _Reader, key: str, choices: dict[str, Any], default: Any = ...) -> Any:
    if not r.has(key) and default is not ...:
        return default
    v = r.get(key).lower()
    if v not in choices:
        raise r.invariant(key, f"{v!r} is not one of {', '.join(sorted(choices))}")
    return choices[v]


@dataclass(frozen=True)
class RunConfig:
    domain: DomainModel
    script: ScenarioScript
    properties: tuple[PropertySpec, ...]
    sensors: tuple[SensorDescriptor, ...]
    mode: MonitoringMode
    policy: Policy = None
    output_path: Optional[str] = None
    labels: dict[str, PropertyId] = field(default_factory=dict)

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(self.mode, self.properties, self.sensors)


def parse_config(text: str) -> RunConfig:
    sections = tokenize(text)
    by_kind: dict[str, list[Section]] = {}
    for sec in sections:
        if sec.kind not in SCHEMAS:
            raise UnknownSectionError(f"unknown section kind {sec.kind!r}", sec.title, sec.line)
        if sec.kind in LABELLED and not sec.label:
            raise ConfigSyntaxError(f"[{sec.kind}] sections need a name", sec.line, 1)
        if sec.kind not in LABELLED and sec.label:
            raise ConfigSyntaxError(f"[{sec.kind}] sections take no name", sec.line, 1)
        same = by_kind.setdefault(sec.kind, [])
        if sec.kind in SINGLETON and same:
            raise DuplicateError(f"only one [{sec.kind}] section allowed", sec.title, sec.line)
        if sec.label and any(s.label == sec.label for s in same):
            raise DuplicateError(f"{sec.kind} {sec.label!r} declared twice", sec.title, sec.line)
        same.append(sec)
    for kind in REQUIRED_SECTIONS:
        if kind not in by_kind:
            raise MissingKeyError(f"missing [{kind}] section", f"[{kind}]")

    domain = _domain(by_kind)
    gauges = domain.gauges()
    script = _script(by_kind, gauges)
    properties, labels = _properties(by_kind, domain)
    sensors = _sensors(by_kind, labels)
    mode, output = _monitor(by_kind["monitor"][0])
    policy = _policy(by_kind.get("policy", [None])[0], labels, sensors)

    watched = {s.property for s in sensors}
    for sec in by_kind.get("property", []):
        if labels[sec.label] not in watched:
            raise ConfigInvariantError("property has no sensor", sec.title, sec.line)
    return RunConfig(domain, script, tuple(properties), tuple(sensors), mode, policy, output, labels)


def _domain(by_kind) -> DomainModel:
    dsec = by_kind["domain"][0]
    r = _Reader(dsec)
    task_secs = {s.label: s for s in by_kind.get("task", [])}
    svc_secs = {s.label: s for s in by_kind.get("service", [])}
    task_names = r.get("tasks")
    for name in task_names:
        if name not in task_secs:
            raise r.dangling("tasks", f"no [task {name}] section")
    for name, sec in task_secs.items():
        if name not in task_names:
            raise DanglingReferenceError(f"task not listed in {dsec.title} tasks", sec.title, sec.line)

    used: dict[str, str] = {}
    tasks = []
    for tname in task_names:
        tr = _Reader(task_secs[tname])
        services = []
        for sname in tr.get("services"):
            if sname not in svc_secs:
                raise tr.dangling("services", f"no [service {sname}] section")
            if sname in used:
                raise tr.invariant("services", f"service {sname!r} already belongs to task {used[sname]!r}")
            used[sname] = tname
            sr = _Reader(svc_secs[sname])
            gauges = tuple(PropertyId(g, sname, "") for g in sr.get("gauges", []))
            services.append(Service(sname, gauges))
        members = tr.get("composite", [s.name for s in services])
        for m in members:
            if m not in {s.name for s in services}:
                raise tr.dangling("composite", f"composite member {m!r} is not a service of this task")
        tasks.append(Task(tname, tuple(services), Composite(tuple(members))))
    for sname, sec in svc_secs.items():
        if sname not in used:
            raise DanglingReferenceError("service not used by any task", sec.title, sec.line)

    seen: dict[str, str] = {}
    for t in tasks:
        for s in t.services:
            for g in s.gauges:
                if g.name in seen:
                    raise ConfigInvariantError(
                        f"gauge {g.name!r} declared by both {seen[g.name]!r} and {s.name!r}",
                        f"[service {s.name}] gauges",
                        svc_secs[s.name].line,
                    )
                seen[g.name] = s.name
    return DomainModel(dsec.label, tuple(tasks))


def _script(by_kind, gauges: dict[str, PropertyId]) -> ScenarioScript:
    r = _Reader(by_kind["scenario"][0])
    seed = r.get("seed", 0)
    duration = r.get("duration")
    if duration < 1:
        raise r.invariant("duration", "duration must be >= 1")

    profiles = {}
    for sec in by_kind.get("gauge", []):
        gr = _Reader(sec)
        if sec.label not in gauges:
            raise DanglingReferenceError(f"no service declares gauge {sec.label!r}", sec.title, sec.line)
        noise = gr.get("noise", 0.0)
        if noise < 0:
            raise gr.invariant("noise", "noise amplitude must be >= 0")
        profiles[sec.label] = GaugeProfile(gr.get("baseline", 0.0), noise)

    events = []
    for sec in by_kind.get("event", []):
        er = _Reader(sec)
        gauge = er.get("gauge")
        if gauge not in gauges:
            raise er.dangling("gauge", f"unknown gauge {gauge!r}")
        tick = er.get("tick")
        if not 0 <= tick < duration:
            raise er.invariant("tick", f"event tick {tick} outside [0, {duration})")
        kind = er.get("kind").lower()
        allowed = {"step": {"value"}, "ramp": {"value", "over"}, "spike": {"value", "width"}, "domain": {"value"}}
        if kind not in allowed:
            raise er.invariant("kind", f"{kind!r} is not one of domain, ramp, spike, step")
        for key in ("value", "over", "width"):
            if er.has(key) and key not in allowed[kind]:
                raise UnknownKeyError(f"key {key!r} does not apply to {kind} events", er.element(key), er.line(key))
        if kind == "domain":
            value = er.get("value", 1.0)
            if value not in (0.0, 1.0):
                raise er.invariant("value", "domain events are 0 or 1")
            events.append(domain_event(gauge, tick, value == 1.0))
            continue
        value = er.get("value")
        if kind == "step":
            effect = StepTo(value)
        elif kind == "ramp":
            over = er.get("over")
            if over < 1:
                raise er.invariant("over", "ramp length must be >= 1")
            effect = RampTo(value, over)
        else:
            width = er.get("width")
            if width < 1:
                raise er.invariant("width", "spike width must be >= 1")
            effect = SpikeTo(value, width)
        events.append(ScriptedEvent(tick, gauge, effect))
    return ScenarioScript(seed, duration, profiles, tuple(events))


_KINDS = {"system": PropertyKind.SYSTEM, "environment": PropertyKind.ENVIRONMENT}
_QOS = {q.value: q for q in QosPurpose}


def _properties(by_kind, domain: DomainModel) -> tuple[list[PropertySpec], dict[str, PropertyId]]:
    gauges = domain.gauges()
    specs: list[PropertySpec] = []
    labels: dict[str, PropertyId] = {}
    owner: dict[PropertyId, str] = {}
    for sec in by_kind.get("property", []):
        r = _Reader(sec)
        name = r.get("name", sec.label)
        if not name:
            raise r.invariant("name", "property name must be non-empty")
        gauge = gauges.get(name)
        component = r.get("component", gauge.component if gauge else "")
        operation = r.get("operation", "")
        pid = PropertyId(name, component, operation)
        if gauges.get(name) != pid:
            raise DanglingReferenceError(f"managed system exposes no gauge {pid}", sec.title, sec.line)
        if pid in owner:
            raise DuplicateError(f"property {pid} already declared by [property {owner[pid]}]", sec.title, sec.line)
        owner[pid] = sec.label

        kind = _choice(r, "kind", _KINDS, PropertyKind.SYSTEM)
        qos = _choice(r, "qos", _QOS, QosPurpose.SELF_OPTIMIZING)
        unit = r.get("unit")
        if not unit:
            raise r.invariant("unit", "unit must be non-empty")
        lower, upper, rel = r.get("lower", None), r.get("upper", None), r.get("relative_change_pct", None)
        if lower is None and upper is None and rel is None:
            raise ConfigInvariantError("threshold needs lower, upper or relative_change_pct", sec.title, sec.line)
        if lower is not None and upper is not None and not lower < upper:
            raise r.invariant("lower", f"lower ({lower}) must be below upper ({upper})")
        if rel is not None and not rel > 0:
            raise r.invariant("relative_change_pct", "relative change must be > 0")
        threshold = Threshold(lower, upper, rel)
        specs.append(PropertySpec(pid, kind, unit, threshold, qos, r.get("core", False)))
        labels[sec.label] = pid
    return specs, labels


def _ref(r: _Reader, key: str, labels: dict[str, PropertyId], value: Optional[str] = None) -> PropertyId:
    label = r.get(key) if value is None else value
    if label not in labels:
        raise r.dangling(key, f"undeclared property {label!r}")
    return labels[label]


def _sensors(by_kind, labels) -> list[SensorDescriptor]:
    out = []
    for sec in by_kind.get("sensor", []):
        r = _Reader(sec)
        pid = _ref(r, "property", labels)
        trigger = r.get("trigger", "time").lower()
        if trigger == "time":
            period = r.get("period")
            if period < 1:
                raise r.invariant("period", "sampling period must be >= 1")
            mode = TimeTriggered(period)
        elif trigger in ("event", "on-demand", "ondemand"):
            if r.has("period"):
                raise r.invariant("period", f"period only applies to time-triggered sensors, not {trigger}")
            mode = EventTriggered() if trigger == "event" else OnDemand()
        else:
            raise r.invariant("trigger", f"{trigger!r} is not one of event, on-demand, time")
        out.append(SensorDescriptor(sec.label, pid, mode))
    return out


def _monitor(sec: Section) -> tuple[MonitoringMode, Optional[str]]:
    r = _Reader(sec)
    raw = r.get("mode").lower()
    codes = {"periodic": 0, "0": 0, "event": 1, "event-triggered": 1, "1": 1}
    if raw not in codes:
        raise r.invariant("mode", f"{raw!r} is not periodic (0) or event (1)")
    if codes[raw] == 0:
        period = r.get("log_period")
        if period < 1:
            raise r.invariant("log_period", "log period must be >= 1")
        mode = mode_from_code(0, period)
    else:
        if r.has("log_period"):
            raise r.invariant("log_period", "log_period only applies to periodic mode")
        mode = EventTriggeredMode()
    return mode, r.get("output", None)


_POLICY_KEYS = {
    "none": set(),
    "frequency": {"p_min", "p_max", "decrease_factor", "increase_factor", "quiet_windows", "initial_period"},
    "stage": {"core", "extended", "stability_windows", "window_ticks"},
    "load": {"load_property", "bands"},
}


def _policy(sec: Optional[Section], labels, sensors) -> Policy:
    if sec is None:
        return None
    r = _Reader(sec)
    kind = r.get("type", "none").lower()
    if kind not in _POLICY_KEYS:
        raise r.invariant("type", f"{kind!r} is not one of frequency, load, none, stage")
    for key, item in sec.items.items():
        if key != "type" and key not in _POLICY_KEYS[kind]:
            raise UnknownKeyError(f"key {key!r} does not apply to {kind} policy", r.element(key), item.line)
    try:
        if kind == "frequency":
            return _frequency(r)
        if kind == "stage":
            return _stage(r, labels, sensors)
        if kind == "load":
            return _load(r, labels)
    except ValueError as exc:
        raise ConfigInvariantError(str(exc), sec.title, sec.line) from None
    return None


def _frequency(r: _Reader) -> FrequencyPolicy:
    p_min, p_max = r.get("p_min"), r.get("p_max")
    if p_min < 1:
        raise r.invariant("p_min", "p_min must be >= 1")
    if p_min > p_max:
        raise r.invariant("p_max", f"p_max ({p_max}) is below p_min ({p_min})")
    dec = r.get("decrease_factor", 0.5)
    if not 0 < dec <= 1:
        raise r.invariant("decrease_factor", "must lie in (0, 1]")
    inc = r.get("increase_factor", 2.0)
    if inc < 1:
        raise r.invariant("increase_factor", "must be >= 1")
    k = r.get("quiet_windows", 3)
    if k < 1:
        raise r.invariant("quiet_windows", "must be >= 1")
    init = r.get("initial_period", None)
    if init is not None and not p_min <= init <= p_max:
        raise r.invariant("initial_period", "must lie in [p_min, p_max]")
    return FrequencyPolicy(p_min, p_max, dec, inc, k, init)


def _stage(r: _Reader, labels, sensors) -> StagePolicy:
    core = {_ref(r, "core", labels, v) for v in r.get("core")}
    extended = {_ref(r, "extended", labels, v) for v in r.get("extended")} | core
    watched = {s.property for s in sensors}
    for pid in sorted(extended):
        if pid not in watched:
            raise r.dangling("extended", f"no sensor watches {pid}")
    stab = r.get("stability_windows", 2)
    if stab < 1:
        raise r.invariant("stability_windows", "must be >= 1")
    window = r.get("window_ticks", 20)
    if window < 1:
        raise r.invariant("window_ticks", "must be >= 1")
    return StagePolicy(frozenset(core), frozenset(extended), stab, window_ticks=window)


def _load(r: _Reader, labels) -> LoadProportionalPolicy:
    pid = _ref(r, "load_property", labels)
    bands = []
    for band in r.get("bands"):
        bound, sep, period = band.partition(":")
        try:
            bands.append((float(bound), int(period)))
        except ValueError:
            raise r.invariant("bands", f"band {band!r} is not '<load bound>:<period>'") from None
        if not sep or bands[-1][1] < 1:
            raise r.invariant("bands", f"band {band!r} needs a period >= 1")
    if [b for b, _ in bands] != sorted(b for b, _ in bands):
        raise r.invariant("bands", "bands must be sorted by load bound")
    return LoadProportionalPolicy(pid, tuple(bands))
