"""Scenario runner: wires simulator, sensors, controller, log and policy together."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from mapemon.adaptive import (
    FrequencyDriver,
    FrequencyPolicy,
    LoadDriver,
    LoadProportionalPolicy,
    StageDriver,
    StagePolicy,
)
from mapemon.config import ConfigError, RunConfig
from mapemon.knowledge import KnowledgeLog, LogEntry
from mapemon.monitor import MonitoringController, MonitoringMode, parse_mode
from mapemon.sensing import TimeTriggered
from mapemon.sim import Simulator, build

Driver = Union[FrequencyDriver, StageDriver, LoadDriver]


class AnalyzerStub:
    """Stand-in for the analyze activity: counts what the log hands it."""

    def __init__(self):
        self.entries = 0
        self.events = 0

    def __call__(self, entry: LogEntry) -> None:
        self.entries += 1
        self.events += len(entry.events)


@dataclass
class RunReport:
    total_ticks: int
    entries_logged: int
    violations_detected: list[tuple[str, str, int]]
    measurements_taken: int
    mode: str = ""
    policy: str = "none"
    period_trace: list[tuple[int, int]] = field(default_factory=list)
    stage_trace: list[tuple[int, str]] = field(default_factory=list)

    @property
    def first_detection_tick(self) -> Optional[int]:
        ticks = [t for _, _, t in self.violations_detected]
        return min(ticks) if ticks else None

    def to_record(self) -> dict:
        return {
            "total_ticks": self.total_ticks,
            "entries_logged": self.entries_logged,
            "violations_detected": [list(v) for v in self.violations_detected],
            "measurements_taken": self.measurements_taken,
            "mode": self.mode,
            "policy": self.policy,
            "period_trace": [list(p) for p in self.period_trace],
            "stage_trace": [list(s) for s in self.stage_trace],
        }

    @classmethod
    def from_record(cls, rec: dict) -> RunReport:
        return cls(
            rec["total_ticks"],
            rec["entries_logged"],
            [tuple(v) for v in rec["violations_detected"]],
            rec["measurements_taken"],
            rec.get("mode", ""),
            rec.get("policy", "none"),
            [tuple(p) for p in rec.get("period_trace", [])],
            [tuple(s) for s in rec.get("stage_trace", [])],
        )


def detections(entries: Sequence[LogEntry]) -> list[tuple[str, str, int]]:
    """First logged tick of every (property, violation kind) pair."""
    first: dict[tuple[str, str], int] = {}
    for e in entries:
        for ev in e.events:
            first.setdefault((str(ev.property), ev.violation.value), e.tick)
    return sorted(((p, k, t) for (p, k), t in first.items()), key=lambda v: (v[2], v[0], v[1]))


@dataclass
class RunResult:
    report: RunReport
    log: KnowledgeLog
    controller: MonitoringController
    simulator: Simulator
    driver: Optional[Driver] = None
    analyzer: Optional[AnalyzerStub] = None


def make_driver(policy) -> Optional[Driver]:
    if policy is None:
        return None
    if isinstance(policy, FrequencyPolicy):
        return FrequencyDriver(policy)
    if isinstance(policy, StagePolicy):
        return StageDriver(policy)
    if isinstance(policy, LoadProportionalPolicy):
        return LoadDriver(policy)
    raise TypeError(f"unknown policy {policy!r}")


def policy_name(policy) -> str:
    return {
        FrequencyPolicy: "frequency",
        StagePolicy: "stage",
        LoadProportionalPolicy: "load",
    }.get(type(policy), "none")


def with_overrides(
    config: RunConfig,
    seed: Optional[int] = None,
    duration: Optional[int] = None,
    mode: Optional[MonitoringMode] = None,
) -> RunConfig:
    script = config.script
    try:
        if seed is not None:
            script = dataclasses.replace(script, seed=seed)
        if duration is not None:
            if duration < 1:
                raise ValueError("duration must be >= 1")
            # a shorter run never reaches events scripted past its end
            kept = tuple(e for e in script.events if e.tick < duration)
            script = dataclasses.replace(script, duration=duration, events=kept)
    except ValueError as exc:
        raise ConfigError(str(exc), "[scenario]") from None
    return dataclasses.replace(config, script=script, mode=mode if mode is not None else config.mode)


TickHook = Callable[[int, MonitoringController, Optional[Driver]], None]


def run(
    config: RunConfig,
    out=None,
    realtime_ms: Optional[float] = None,
    on_tick: Optional[TickHook] = None,
) -> RunResult:
    """Run the scenario for ticks ``0..duration`` and optionally persist the log."""
    sim = build(config.domain, config.script)
    log = KnowledgeLog()
    analyzer = AnalyzerStub()
    log.subscribe(analyzer)
    controller = MonitoringController.from_config(config.controller_config(), sim, log)
    driver = make_driver(config.policy)
    if driver is not None:
        driver.install(controller)

    for t in range(config.script.duration + 1):
        if t:
            sim.step()
        controller.tick(t)
        if driver is not None:
            driver.after_tick(t)
        if on_tick is not None:
            on_tick(t, controller, driver)
        if realtime_ms:
            time.sleep(realtime_ms / 1000.0)
    controller.finish()

    report = RunReport(
        total_ticks=config.script.duration,
        entries_logged=len(log),
        violations_detected=detections(log.entries),
        measurements_taken=controller.measurements_taken,
        mode=str(controller.mode),
        policy=policy_name(config.policy),
        period_trace=list(driver.trace) if isinstance(driver, (FrequencyDriver, LoadDriver)) else [],
        stage_trace=[(t, s.value) for t, s in driver.trace] if isinstance(driver, StageDriver) else [],
    )
    log.summary = report.to_record()
    if out is not None:
        log.persist(out)
    return RunResult(report, log, controller, sim, driver, analyzer)


@dataclass(frozen=True)
class Variant:
    """One column of a comparison: an optional mode override and a policy choice.

    ``policy`` is ``"config"`` (keep the configured policy), ``"none"``, or
    ``"fixed:<p>"`` (no policy, every time-triggered sensor sampling at ``p``).
    """

    label: str
    mode: Optional[MonitoringMode] = None
    policy: str = "config"


def parse_variant(text: str) -> Variant:
    """Parse ``MODE[/POLICY]`` where MODE is ``event``, ``periodic:<p>`` or ``config``."""
    mode_text, _, policy = text.partition("/")
    mode = None if mode_text.strip() in ("", "config") else parse_mode(mode_text)
    policy = policy.strip() or "config"
    if policy not in ("config", "none") and not policy.startswith("fixed:"):
        raise ValueError(f"policy must be config, none or fixed:<p>, got {policy!r}")
    if policy.startswith("fixed:"):
        try:
            if int(policy[6:]) < 1:
                raise ValueError
        except ValueError:
            raise ValueError(f"bad fixed period in {text!r}") from None
    return Variant(text, mode, policy)


def apply_variant(config: RunConfig, variant: Variant) -> RunConfig:
    config = with_overrides(config, mode=variant.mode)
    if variant.policy == "none":
        return dataclasses.replace(config, policy=None)
    if variant.policy.startswith("fixed:"):
        p = int(variant.policy[6:])
        sensors = tuple(
            dataclasses.replace(s, mode=TimeTriggered(p)) if isinstance(s.mode, TimeTriggered) else s
            for s in config.sensors
        )
        return dataclasses.replace(config, policy=None, sensors=sensors)
    return config


def compare(config: RunConfig, variants: Sequence[Variant]) -> list[tuple[Variant, RunReport]]:
    if len(variants) < 2:
        raise ValueError("compare needs at least two variants")
    return [(v, run(apply_variant(config, v)).report) for v in variants]


def format_report(report: RunReport) -> str:
    lines = [
        f"mode                {report.mode}",
        f"policy              {report.policy}",
        f"ticks               {report.total_ticks}",
        f"entries logged      {report.entries_logged}",
        f"measurements taken  {report.measurements_taken}",
        f"violations          {len(report.violations_detected)}",
    ]
    if report.violations_detected:
        width = max(len(p) for p, _, _ in report.violations_detected)
        lines.append("")
        lines.append(f"  {'property':<{width}}  {'kind':<15}  first logged at")
        for prop, kind, tick in report.violations_detected:
            lines.append(f"  {prop:<{width}}  {kind:<15}  {tick}")
    if report.period_trace:
        lines.append("")
        lines.append("period trace  " + " ".join(f"{t}:{p}" for t, p in report.period_trace))
    if report.stage_trace:
        lines.append("")
        lines.append("stage trace   " + " ".join(f"{t}:{s}" for t, s in report.stage_trace))
    return "\n".join(lines)


def format_comparison(rows: Sequence[tuple[Variant, RunReport]]) -> str:
    firsts = [r.first_detection_tick for _, r in rows if r.first_detection_tick is not None]
    best = min(firsts) if firsts else None
    width = max(8, *(len(v.label) for v, _ in rows))
    header = f"{'variant':<{width}}  {'first detection':>15}  {'delay':>5}  {'entries':>7}  {'measurements':>12}"
    lines = [header, "-" * len(header)]
    for v, r in rows:
        first = r.first_detection_tick
        det = "-" if first is None else str(first)
        delay = "-" if first is None else str(first - best)
        lines.append(f"{v.label:<{width}}  {det:>15}  {delay:>5}  {r.entries_logged:>7}  {r.measurements_taken:>12}")
    return "\n".join(lines)
