"""Append-only knowledge log and its newline-delimited file format.

File layout (``.ndlog``)::

    {"format":"mapemon.ndlog","version":1}
    {"seq":0,"tick":0,"cause":"PeriodicTick","overhead":3,"composed_at":0,"state":[...],"events":[...]}
    ...
    {"cause":"RunSummary",...}          # optional, written by the scenario runner

Each record is a compact JSON object with a fixed key order. Floats go through
``repr`` so they round-trip exactly, which keeps golden files bit-stable.
"""

from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from mapemon.errors import AppendError, HistoryRangeError, LogParseError, NotSubscribedError
from mapemon.properties import Measurement, PropertyId, SystemState, Violation, ViolationEvent

FORMAT_NAME = "mapemon.ndlog"
FORMAT_VERSION = 1
SUMMARY_CAUSE = "RunSummary"


class LogCause(enum.Enum):
    PERIODIC_TICK = "PeriodicTick"
    VIOLATION = "Violation"


@dataclass(frozen=True)
class LogEntry:
    seq: int
    tick: int
    cause: LogCause
    state: SystemState
    events: tuple[ViolationEvent, ...] = ()
    measurements_taken_this_tick: int = 0

    def __post_init__(self):
        if self.cause is LogCause.VIOLATION and not self.events:
            raise ValueError("a Violation entry must carry at least one event")


AnalyzerTrigger = Callable[[LogEntry], None]


class KnowledgeLog:
    """In-memory append-only log with synchronous subscriber notification.

    Appends and reads are serialized by a re-entrant lock, so a reader thread
    never sees a half-appended entry and a subscriber may read the log from
    inside its callback.
    """

    def __init__(self):
        self._entries: list[LogEntry] = []
        self._subscribers: list[AnalyzerTrigger] = []
        self._lock = threading.RLock()
        self.summary: Optional[dict[str, Any]] = None

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def entries(self) -> tuple[LogEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def log(
        self,
        state: SystemState,
        events: Sequence[ViolationEvent] = (),
        cause: LogCause = LogCause.PERIODIC_TICK,
        tick: Optional[int] = None,
        overhead: int = 0,
    ) -> int:
        if tick is None:
            tick = state.composed_at
        with self._lock:
            if self._entries and tick < self._entries[-1].tick:
                raise AppendError(f"tick {tick} precedes last logged tick {self._entries[-1].tick}")
            entry = LogEntry(len(self._entries), tick, cause, state, tuple(events), overhead)
            self._entries.append(entry)
            for sub in list(self._subscribers):
                sub(entry)
            return entry.seq

    def get_data(self) -> Optional[LogEntry]:
        with self._lock:
            return self._entries[-1] if self._entries else None

    def history(self, from_tick: int, to_tick: int) -> list[LogEntry]:
        if from_tick > to_tick:
            raise HistoryRangeError(f"inverted range [{from_tick}, {to_tick}]")
        with self._lock:
            return [e for e in self._entries if from_tick <= e.tick <= to_tick]

    def subscribe(self, trigger: AnalyzerTrigger) -> None:
        with self._lock:
            self._subscribers.append(trigger)

    def unsubscribe(self, trigger: AnalyzerTrigger) -> None:
        with self._lock:
            for i, s in enumerate(self._subscribers):
                if s is trigger or s == trigger:
                    del self._subscribers[i]
                    return
        raise NotSubscribedError(f"{trigger!r} is not subscribed")

    def persist(self, path) -> None:
        Path(path).write_text(dumps(self.entries, self.summary), encoding="utf-8")

    @classmethod
    def load(cls, path) -> KnowledgeLog:
        return loads(Path(path).read_text(encoding="utf-8"))


def _dump(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def _pid_fields(pid: PropertyId) -> dict:
    return {"name": pid.name, "component": pid.component, "operation": pid.operation}


def entry_to_record(e: LogEntry) -> dict:
    state = [
        {**_pid_fields(pid), "value": m.value, "tick": m.tick, "sensor": m.sensor_id}
        for pid, m in sorted(e.state.entries.items())
    ]
    events = [
        {
            **_pid_fields(ev.property),
            "kind": ev.violation.value,
            "observed": ev.observed,
            "reference": ev.reference,
            "tick": ev.tick,
        }
        for ev in e.events
    ]
    return {
        "seq": e.seq,
        "tick": e.tick,
        "cause": e.cause.value,
        "overhead": e.measurements_taken_this_tick,
        "composed_at": e.state.composed_at,
        "state": state,
        "events": events,
    }


def record_to_entry(rec: dict) -> LogEntry:
    measurements = []
    for s in rec["state"]:
        pid = PropertyId(s["name"], s["component"], s["operation"])
        measurements.append(Measurement(pid, float(s["value"]), int(s["tick"]), s["sensor"]))
    state = SystemState({m.property: m for m in measurements}, int(rec["composed_at"]))
    events = tuple(
        ViolationEvent(
            PropertyId(ev["name"], ev["component"], ev["operation"]),
            Violation(ev["kind"]),
            float(ev["observed"]),
            int(ev["tick"]),
            None if ev["reference"] is None else float(ev["reference"]),
        )
        for ev in rec["events"]
    )
    return LogEntry(int(rec["seq"]), int(rec["tick"]), LogCause(rec["cause"]), state, events, int(rec["overhead"]))


def dumps(entries: Sequence[LogEntry], summary: Optional[dict] = None) -> str:
    lines = [_dump({"format": FORMAT_NAME, "version": FORMAT_VERSION})]
    lines.extend(_dump(entry_to_record(e)) for e in entries)
    if summary is not None:
        lines.append(_dump({"cause": SUMMARY_CAUSE, **summary}))
    return "\n".join(lines) + "\n"


def loads(text: str) -> KnowledgeLog:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    out = KnowledgeLog()
    if not lines:
        return out

    def parse(lineno: int, raw: str) -> dict:
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise LogParseError(f"malformed record ({exc.msg})", lineno) from None
        if not isinstance(rec, dict):
            raise LogParseError("record is not an object", lineno)
        return rec

    header = parse(1, lines[0])
    if header.get("format") != FORMAT_NAME:
        raise LogParseError("missing ndlog header", 1)
    if header.get("version") != FORMAT_VERSION:
        raise LogParseError(f"unsupported format version {header.get('version')!r}", 1)

    for lineno, raw in enumerate(lines[1:], start=2):
        rec = parse(lineno, raw)
        if out.summary is not None:
            raise LogParseError("record after run summary", lineno)
        if rec.get("cause") == SUMMARY_CAUSE:
            out.summary = {k: v for k, v in rec.items() if k != "cause"}
            continue
        try:
            entry = record_to_entry(rec)
        except (KeyError, TypeError, ValueError) as exc:
            raise LogParseError(f"bad entry field: {exc}", lineno) from None
        if entry.seq != len(out):
            raise LogParseError(f"expected seq {len(out)}, found {entry.seq}", lineno)
        if len(out) and entry.tick < out.get_data().tick:
            raise LogParseError(f"tick {entry.tick} goes backwards", lineno)
        out._entries.append(entry)
    return out
