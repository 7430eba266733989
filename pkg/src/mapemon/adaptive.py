"""Adaptive monitoring: trade measurement overhead against detection.

Three levers, one per run:

* frequency modulation, multiplicative decrease of the sampling period on an
  alarm and multiplicative increase after ``k`` quiet log windows;
* two-stage metric sets, a core set normally and an extended set after an
  anomaly until the system has been clean for a while;
* load-proportional sampling, with the period chosen from load bands.

The update rules are pure functions. The ``*Driver`` classes apply them to a
running :class:`~mapemon.monitor.MonitoringController` between ticks, so
every change takes effect at the next tick boundary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from mapemon.errors import ConfigurationError
from mapemon.knowledge import LogEntry
from mapemon.monitor import MonitoringController
from mapemon.properties import PropertyId
from mapemon.sensing import TimeTriggered


class WindowOutcome(enum.Enum):
    ALARM = "alarm"
    QUIET = "quiet"


class Stage(enum.Enum):
    CORE_ONLY = "core"
    EXTENDED = "extended"


@dataclass(frozen=True)
class FrequencyPolicy:
    p_min: int
    p_max: int
    decrease_factor: float = 0.5
    increase_factor: float = 2.0
    quiet_windows_required: int = 3
    initial_period: Optional[int] = None

    def __post_init__(self):
        if self.p_min < 1:
            raise ValueError("p_min must be >= 1")
        if self.p_min > self.p_max:
            raise ValueError(f"p_min ({self.p_min}) exceeds p_max ({self.p_max})")
        if not 0 < self.decrease_factor <= 1:
            raise ValueError("decrease_factor must lie in (0, 1]")
        if self.increase_factor < 1:
            raise ValueError("increase_factor must be >= 1")
        if self.quiet_windows_required < 1:
            raise ValueError("quiet_windows_required must be >= 1")
        if self.initial_period is not None and not self.p_min <= self.initial_period <= self.p_max:
            raise ValueError("initial_period must lie in [p_min, p_max]")

    @property
    def start_period(self) -> int:
        return self.p_min if self.initial_period is None else self.initial_period


def adjust_frequency(policy: FrequencyPolicy, period: int, outcome: WindowOutcome, quiet_streak: int) -> tuple[int, int]:
    """Return ``(new_period, new_quiet_streak)`` after one log window."""
    if outcome is WindowOutcome.ALARM:
        return max(policy.p_min, math.floor(period * policy.decrease_factor)), 0
    streak = quiet_streak + 1
    if streak >= policy.quiet_windows_required:
        return min(policy.p_max, math.floor(period * policy.increase_factor)), 0
    return period, streak


@dataclass(frozen=True)
class StagePolicy:
    core_set: frozenset[PropertyId]
    extended_set: frozenset[PropertyId]
    stability_windows: int = 2
    current_stage: Stage = Stage.CORE_ONLY
    window_ticks: int = 20
    clean_windows: int = 0

    def __post_init__(self):
        object.__setattr__(self, "core_set", frozenset(self.core_set))
        object.__setattr__(self, "extended_set", frozenset(self.extended_set))
        if not self.core_set <= self.extended_set:
            raise ValueError("core set must be a subset of the extended set")
        if self.stability_windows < 1:
            raise ValueError("stability_windows must be >= 1")
        if self.window_ticks < 1:
            raise ValueError("window_ticks must be >= 1")

    def prescribed(self) -> frozenset[PropertyId]:
        return self.core_set if self.current_stage is Stage.CORE_ONLY else self.extended_set


def install_stage(policy: StagePolicy, controller: MonitoringController) -> StagePolicy:
    """Check the controller can serve every stage and enforce the current one."""
    watched = {s.property for s in controller.sensors.values()}
    missing = sorted(str(p) for p in policy.extended_set - watched)
    if missing:
        raise ConfigurationError(f"stage policy: no sensor for {', '.join(missing)}")
    _enforce(policy, controller)
    return policy


def _enforce(policy: StagePolicy, controller: MonitoringController) -> None:
    wanted = policy.prescribed()
    for sid, s in sorted(controller.sensors.items()):
        if s.property in wanted:
            controller.activate_sensor(sid)
        else:
            controller.retire_sensor(sid)


def apply_stage(policy: StagePolicy, controller: MonitoringController, log_window: Sequence[LogEntry]) -> StagePolicy:
    """Advance the two-stage state machine by one window of log entries."""
    alarm = any(e.events for e in log_window)
    if policy.current_stage is Stage.CORE_ONLY:
        if not alarm:
            return policy
        new = replace(policy, current_stage=Stage.EXTENDED, clean_windows=0)
    elif alarm:
        return replace(policy, clean_windows=0)
    elif policy.clean_windows + 1 >= policy.stability_windows:
        new = replace(policy, current_stage=Stage.CORE_ONLY, clean_windows=0)
    else:
        return replace(policy, clean_windows=policy.clean_windows + 1)
    _enforce(new, controller)
    return new


@dataclass(frozen=True)
class LoadProportionalPolicy:
    load_property: PropertyId
    bands: tuple[tuple[float, int], ...]

    def __post_init__(self):
        bands = tuple((float(b), int(p)) for b, p in self.bands)
        object.__setattr__(self, "bands", bands)
        if not bands:
            raise ValueError("load policy needs at least one band")
        bounds = [b for b, _ in bands]
        if bounds != sorted(bounds):
            raise ValueError("load bands must be sorted by upper bound")
        if any(p < 1 for _, p in bands):
            raise ValueError("band periods must be >= 1")


def load_band_period(policy: LoadProportionalPolicy, current_load: float) -> int:
    for bound, period in policy.bands:
        if bound >= current_load:
            return period
    return policy.bands[-1][1]


def _time_triggered(controller: MonitoringController) -> list[str]:
    return sorted(sid for sid, s in controller.sensors.items() if isinstance(s.mode, TimeTriggered))


class FrequencyDriver:
    """Applies :func:`adjust_frequency` once per log entry to every time-triggered sensor.

    A shorter period takes effect on the next tick. A longer one waits for a
    tick on which the current period has just sampled, so a sample that is
    already scheduled is never pushed back.
    """

    def __init__(self, policy: FrequencyPolicy):
        self.policy = policy
        self.period = policy.start_period  # period the sensors run at
        self.target = self.period  # period the policy asks for
        self.streak = 0
        self.trace: list[tuple[int, int]] = []
        self._seen: list[LogEntry] = []
        self._controller: Optional[MonitoringController] = None

    def install(self, controller: MonitoringController) -> None:
        self._controller = controller
        for sid in _time_triggered(controller):
            controller.set_sensor_period(sid, self.period)
        controller.log.subscribe(self._seen.append)
        self.trace.append((0, self.period))

    def after_tick(self, now: int) -> None:
        entries, self._seen[:] = list(self._seen), []
        for e in entries:
            outcome = WindowOutcome.ALARM if e.events else WindowOutcome.QUIET
            self.target, self.streak = adjust_frequency(self.policy, self.target, outcome, self.streak)
        if self.target == self.period:
            return
        if self.target > self.period and now % self.period:
            return
        self.period = self.target
        for sid in _time_triggered(self._controller):
            self._controller.set_sensor_period(sid, self.period)
        self.trace.append((now + 1, self.period))


class StageDriver:
    """Evaluates the stage policy over fixed windows of ``window_ticks`` ticks."""

    def __init__(self, policy: StagePolicy):
        self.policy = policy
        self.trace: list[tuple[int, Stage]] = []
        self._controller: Optional[MonitoringController] = None

    def install(self, controller: MonitoringController) -> None:
        self._controller = controller
        self.policy = install_stage(self.policy, controller)
        self.trace.append((0, self.policy.current_stage))

    def after_tick(self, now: int) -> None:
        w = self.policy.window_ticks
        if (now + 1) % w:
            return
        window = self._controller.log.history(now + 1 - w, now)
        before = self.policy.current_stage
        self.policy = apply_stage(self.policy, self._controller, window)
        if self.policy.current_stage is not before:
            self.trace.append((now + 1, self.policy.current_stage))


class LoadDriver:
    """Re-picks the sampling period from the latest composed load value after every tick."""

    def __init__(self, policy: LoadProportionalPolicy):
        self.policy = policy
        self.period: Optional[int] = None
        self.trace: list[tuple[int, int]] = []
        self._controller: Optional[MonitoringController] = None

    def install(self, controller: MonitoringController) -> None:
        if self.policy.load_property not in controller.specs:
            raise ConfigurationError(f"load policy: undeclared load property {self.policy.load_property}")
        self._controller = controller

    def after_tick(self, now: int) -> None:
        m = self._controller.current.get(self.policy.load_property)
        if m is None:
            return
        period = load_band_period(self.policy, m.value)
        if period != self.period:
            self.period = period
            for sid in _time_triggered(self._controller):
                self._controller.set_sensor_period(sid, period)
            self.trace.append((now + 1, period))
