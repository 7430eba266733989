"""Acceptance suite: one marked group of tests per numbered criterion.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section at the end of the output for one PASS/FAIL line per criterion.
"""

import dataclasses
import math
import os
import random
import subprocess
import sys
from collections import Counter
from pathlib import Path

import pytest

from config_cases import MALFORMED
from helpers import BANDWIDTH, LOAD, RESPONSE, brute_violations, domain, load_config, spike, three_metric_config
from mapemon.adaptive import FrequencyPolicy, Stage, StagePolicy
from mapemon.cli import main
from mapemon.config import RunConfig, parse_config
from mapemon.knowledge import KnowledgeLog, loads
from mapemon.monitor import EventTriggeredMode, PeriodicMode
from mapemon.properties import PropertyId, PropertyKind, PropertySpec, Threshold, Violation, check_threshold
from mapemon.runner import run
from mapemon.sensing import EventTriggered, SensorDescriptor, TimeTriggered
from mapemon.sim import GaugeProfile, RampTo, ScenarioScript, ScriptedEvent, SpikeTo, StepTo

ROOT = Path(__file__).resolve().parents[1]
WEBSHOP = ROOT / "configs" / "webshop.cfg"
GOLDEN = Path(__file__).resolve().parent / "golden" / "webshop.ndlog"


def detail(request, text):
    request.node.user_properties.append(("detail", text))


# 1. threshold evaluation against a clause-by-clause reference

def random_triple(rng):
    def pick():
        # small integers make exact boundary hits common
        return float(rng.randint(-20, 20)) if rng.random() < 0.5 else rng.uniform(-100, 100)

    while True:
        lower = pick() if rng.random() < 0.6 else None
        upper = pick() if rng.random() < 0.6 else None
        pct = rng.choice([None, 5.0, 20.0, 50.0, rng.uniform(0.1, 300)])
        if lower is None and upper is None and pct is None:
            continue
        if lower is not None and upper is not None and lower >= upper:
            continue
        break
    previous = rng.choice([None, 0.0, pick()])
    value = rng.choice([pick(), lower if lower is not None else 0.0, upper if upper is not None else 0.0])
    return Threshold(lower, upper, pct), previous, value


@pytest.mark.acceptance(1, "threshold oracle equivalence")
def test_threshold_oracle_equivalence(request):
    rng = random.Random(20240601)
    mismatches = 0
    for _ in range(10_000):
        th, prev, value = random_triple(rng)
        if check_threshold(th, prev, value) != brute_violations(th, prev, value):
            mismatches += 1
    detail(request, f"{mismatches} mismatches / 10000")
    assert mismatches == 0


@pytest.mark.acceptance(1, "threshold oracle equivalence")
def test_threshold_anchor_examples():
    assert check_threshold(Threshold(upper=50.0), None, 55.0) == [Violation.UPPER]
    assert check_threshold(Threshold(relative_change_pct=20.0), 40.0, 50.0) == [Violation.RELATIVE_CHANGE]


# 2. entry counts per logging mode

@pytest.mark.acceptance(2, "mode counting")
def test_mode_counting(request):
    periodic = len(run(load_config(duration=100, mode="periodic:10")).log)
    event = len(run(load_config(duration=100, mode="event")).log)
    detail(request, f"periodic(10)={periodic}, event={event}")
    assert periodic == 11
    assert event == 0


# 3. event-triggered logging never reports later than periodic logging

def first_logged_violation(cfg):
    for e in run(cfg).log.entries:
        if any(ev.property == LOAD for ev in e.events):
            return e.tick
    return None


@pytest.mark.acceptance(3, "detection-latency ordering")
def test_spike_at_103(request):
    ev = first_logged_violation(load_config(duration=200, mode="event", events=[spike(103)]))
    per = first_logged_violation(load_config(duration=200, mode="periodic:10", events=[spike(103)]))
    detail(request, f"spike@103: event={ev}, periodic(10)={per}")
    assert (ev, per) == (103, 110)


@pytest.mark.acceptance(3, "detection-latency ordering")
def test_latency_ordering_generalized(request):
    rng = random.Random(7)
    ticks = rng.sample(range(1, 400), 50)
    worse = 0
    for s in ticks:
        duration = s + 40
        events = [spike(s, width=rng.randint(1, 15))]
        ev = first_logged_violation(load_config(duration=duration, mode="event", noise=5.0, seed=s, events=events))
        assert ev == s
        for p in range(1, 21):
            per = first_logged_violation(load_config(duration=duration, mode=f"periodic:{p}", noise=5.0, seed=s, events=events))
            # buffered events surface at the first log point at or after the spike
            assert per == math.ceil(s / p) * p
            worse += ev > per
    detail(request, f"50 spike ticks x p=1..20: {worse} inversions")
    assert worse == 0


# 4. every detected event is logged exactly once

GAUGES = ["server_load", "response_time", "bandwidth", "connected_clients"]


def random_scenario(rng, mode):
    ids = [PropertyId(g, "web") for g in GAUGES]
    duration = rng.randint(30, 250)
    profiles = {g: GaugeProfile(rng.uniform(10, 60), rng.uniform(0, 15)) for g in GAUGES}
    events = []
    for _ in range(rng.randint(0, 6)):
        g = rng.choice(GAUGES)
        t = rng.randrange(duration)
        effect = rng.choice([SpikeTo(rng.uniform(0, 120), rng.randint(1, 20)), StepTo(rng.uniform(0, 120)), RampTo(rng.uniform(0, 120), rng.randint(1, 30))])
        events.append(ScriptedEvent(t, g, effect))
    specs, sensors = [], []
    for i, pid in enumerate(ids):
        lo = rng.uniform(0, 20) if rng.random() < 0.5 else None
        hi = rng.uniform(40, 80) if rng.random() < 0.7 or lo is None else None
        pct = rng.choice([None, 25.0, 60.0])
        specs.append(PropertySpec(pid, PropertyKind.SYSTEM, "u", Threshold(lo, hi, pct)))
        for k in range(rng.randint(1, 2)):
            trig = EventTriggered() if rng.random() < 0.4 else TimeTriggered(rng.randint(1, 7))
            sensors.append(SensorDescriptor(f"s{i}{k}", pid, trig))
    return RunConfig(
        domain=domain(*ids),
        script=ScenarioScript(rng.getrandbits(32), duration, profiles, tuple(events)),
        properties=tuple(specs),
        sensors=tuple(sensors),
        mode=mode,
    )


@pytest.mark.acceptance(4, "event conservation")
def test_event_conservation(request):
    rng = random.Random(404)
    lost = duplicated = total = 0
    for _ in range(100):
        seed = rng.getrandbits(32)
        for mode in (EventTriggeredMode(), PeriodicMode(rng.randint(1, 30))):
            r = run(random_scenario(random.Random(seed), mode))
            logged = Counter(id(ev) for e in r.log.entries for ev in e.events)
            detected = r.controller.events_detected
            total += len(detected)
            lost += sum(1 for ev in detected if logged[id(ev)] == 0)
            duplicated += sum(n - 1 for n in logged.values() if n > 1)
            assert set(logged) <= {id(ev) for ev in detected}
            assert r.analyzer.events == len(detected)
    detail(request, f"{total} events over 200 runs: {lost} lost, {duplicated} duplicated")
    assert total > 0
    assert lost == 0 and duplicated == 0


# 5. frequency modulation saves work without missing spikes

POLICY = FrequencyPolicy(p_min=1, p_max=32, decrease_factor=0.5, increase_factor=2.0, quiet_windows_required=3)


def clamp_hook(bad):
    def hook(t, controller, driver):
        periods = {s.descriptor.mode.period for s in controller.sensors.values() if isinstance(s.descriptor.mode, TimeTriggered)}
        if not all(POLICY.p_min <= p <= POLICY.p_max for p in periods | {driver.period, driver.target}):
            bad.append(t)
    return hook


@pytest.mark.acceptance(5, "adaptive overhead dominance")
def test_quiet_overhead(request):
    bad = []
    adaptive = run(load_config(duration=1000, mode="periodic:10", policy=POLICY), on_tick=clamp_hook(bad)).controller.measurements_taken
    fixed = run(load_config(duration=1000, mode="periodic:10", period=1)).controller.measurements_taken
    detail(request, f"quiet 1000 ticks: adaptive {adaptive} vs fixed(1) {fixed} measurements")
    assert adaptive < fixed
    assert bad == []


@pytest.mark.acceptance(5, "adaptive overhead dominance")
def test_spike_detected_within_current_period(request):
    rng = random.Random(55)
    # every tick while the period is still growing, then a sample of the steady state
    spike_ticks = list(range(1, 200)) + rng.sample(range(200, 960), 100)
    worst = 0.0
    bad = []
    for s in spike_ticks:
        periods = {}
        check = clamp_hook(bad)

        def hook(t, controller, driver):
            periods[t] = driver.period
            check(t, controller, driver)

        cfg = load_config(duration=1000, mode="periodic:10", noise=3.0, seed=s, events=[spike(s, width=POLICY.p_max)], policy=POLICY)
        r = run(cfg, on_tick=hook)
        detected = min(ev.tick for ev in r.controller.events_detected if ev.property == LOAD)
        in_force = periods[s - 1]  # period the sensor runs at during tick s
        worst = max(worst, (detected - s) / in_force)
        assert s <= detected < s + in_force, (s, detected, in_force)
    detail(request, f"{len(spike_ticks)} spike ticks, worst lag {worst:.2f} of the period in force")
    assert bad == []


# 6. two-stage metric sets

STAGES = StagePolicy(frozenset({LOAD}), frozenset({LOAD, RESPONSE, BANDWIDTH}), stability_windows=2)


def expected_stage_trace(event_ticks, duration, window=20, stability=2):
    """Replay window outcomes from the detected event ticks."""
    stage, clean, trace = Stage.CORE_ONLY, 0, [(0, Stage.CORE_ONLY)]
    for start in range(0, duration + 1 - window + 1, window):
        alarm = any(start <= t < start + window for t in event_ticks)
        if stage is Stage.CORE_ONLY:
            if alarm:
                stage, clean = Stage.EXTENDED, 0
                trace.append((start + window, stage))
        else:
            clean = 0 if alarm else clean + 1
            if clean >= stability:
                stage, clean = Stage.CORE_ONLY, 0
                trace.append((start + window, stage))
    return trace


def stage_at(trace, t):
    return [s for tick, s in trace if tick <= t][-1]


def stage_scenario(seed, spike_tick, mode="event"):
    rng = random.Random(seed)
    events = [spike(spike_tick, width=rng.randint(1, 12))]
    # extended-only disturbances, visible only while the extended set is active
    for _ in range(rng.randint(0, 3)):
        events.append(ScriptedEvent(rng.randrange(300), rng.choice(["response_time", "bandwidth"]), SpikeTo(999.0, rng.randint(1, 30))))
    return three_metric_config(duration=300, events=events, mode=mode, seed=seed, noise=2.0)


@pytest.mark.acceptance(6, "two-stage stage soundness")
def test_stage_soundness(request):
    mismatched_ticks = 0
    transitions = 0
    for seed in range(40):
        spike_tick = random.Random(seed).randrange(5, 280)
        for mode in ("event", "periodic:1"):
            cfg = stage_scenario(seed, spike_tick, mode)
            seen = []

            def hook(t, controller, driver):
                seen.append((t, frozenset(controller.active_properties()), driver.policy.prescribed()))

            r = run(dataclasses.replace(cfg, policy=STAGES), on_tick=hook)
            trace = r.driver.trace
            assert trace == expected_stage_trace([ev.tick for ev in r.controller.events_detected], 300)
            transitions += len(trace) - 1
            # after the driver runs, the sensors match the stage that governs the next tick
            mismatched_ticks += sum(active != prescribed for _, active, prescribed in seen)
            for t, _, prescribed in seen:
                expect = STAGES.core_set if stage_at(trace, t + 1) is Stage.CORE_ONLY else STAGES.extended_set
                assert prescribed == expect
            if mode == "periodic:1":
                for e in r.log.entries:
                    want = STAGES.core_set if stage_at(trace, e.tick) is Stage.CORE_ONLY else STAGES.extended_set
                    assert set(e.state.entries) == want, e.tick
    detail(request, f"80 runs, {transitions} stage transitions, {mismatched_ticks} ticks with active set != prescribed")
    assert mismatched_ticks == 0
    assert transitions > 0


@pytest.mark.acceptance(6, "two-stage stage soundness")
def test_stage_flip_timing():
    cfg = dataclasses.replace(three_metric_config(duration=200, events=[spike(45, width=3)]), policy=STAGES)
    r = run(cfg)
    # violation in window [40, 59] -> extended from 60; clean [60, 79] and [80, 99] -> core from 100
    assert r.driver.trace == [(0, Stage.CORE_ONLY), (60, Stage.EXTENDED), (100, Stage.CORE_ONLY)]


@pytest.mark.acceptance(6, "two-stage stage soundness")
def test_core_detection_matches_always_extended(request):
    differing = 0
    for seed in range(60):
        spike_tick = random.Random(seed).randrange(5, 280)
        cfg = stage_scenario(seed, spike_tick)
        staged = run(dataclasses.replace(cfg, policy=STAGES))
        baseline = run(cfg)  # every sensor active throughout

        def first(r):
            return min(ev.tick for ev in r.controller.events_detected if ev.property == LOAD)

        differing += first(staged) != first(baseline)
    detail(request, f"60 scenarios, {differing} with a different core detection tick")
    assert differing == 0


# 7. determinism and persistence

def cli_run(config, out, env_seed):
    env = dict(os.environ, PYTHONHASHSEED=str(env_seed))
    proc = subprocess.run(
        [sys.executable, "-m", "mapemon", "run", "--config", str(config), "--out", str(out)],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0, proc.stderr
    return out.read_bytes()


@pytest.mark.acceptance(7, "determinism and persistence")
def test_golden_file(tmp_path, request):
    a = cli_run(WEBSHOP, tmp_path / "a.ndlog", 1)
    b = cli_run(WEBSHOP, tmp_path / "b.ndlog", 2)
    assert a == b
    assert a == GOLDEN.read_bytes()
    log = KnowledgeLog.load(GOLDEN)
    # 200 ticks logged every 10; stock-out raised at 40; load spike at 103 surfaces at 110
    assert len(log) == 21
    firsts = {v[0]: v[2] for v in log.summary["violations_detected"]}
    assert firsts == {"inventory/out_of_stock": 40, "web/server_load": 110}
    detail(request, f"golden {GOLDEN.name} matched ({len(a)} bytes)")


@pytest.mark.acceptance(7, "determinism and persistence")
def test_reruns_byte_identical_and_round_trip(tmp_path):
    rng = random.Random(77)
    configs = [parse_config(WEBSHOP.read_text())]
    configs += [random_scenario(random.Random(rng.getrandbits(32)), EventTriggeredMode()) for _ in range(10)]
    configs += [random_scenario(random.Random(rng.getrandbits(32)), PeriodicMode(7)) for _ in range(10)]
    configs.append(dataclasses.replace(load_config(duration=400, noise=20.0, mode="periodic:10"), policy=POLICY))
    configs.append(dataclasses.replace(stage_scenario(5, 120), policy=STAGES))
    for i, cfg in enumerate(configs):
        first, second = tmp_path / f"{i}a.ndlog", tmp_path / f"{i}b.ndlog"
        r = run(cfg, out=first)
        run(cfg, out=second)
        assert first.read_bytes() == second.read_bytes()
        back = KnowledgeLog.load(first)
        assert back.entries == r.log.entries
        assert back.summary == r.log.summary
        assert loads(first.read_text()).entries == back.entries


# 8. malformed configuration documents

@pytest.mark.acceptance(8, "config validation")
def test_malformed_configs_exit_2(tmp_path, capsys, request):
    assert len(MALFORMED) >= 10
    failures = []
    for name, (text, _, element) in sorted(MALFORMED.items()):
        path = tmp_path / f"{name}.cfg"
        path.write_text(text)
        code = main(["validate", "--config", str(path)])
        err = capsys.readouterr().err
        if code != 2 or element not in err:
            failures.append((name, code, err))
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "x.ndlog")])
        err = capsys.readouterr().err
        if code != 2 or element not in err:
            failures.append((name, code, err))
    detail(request, f"{len(MALFORMED)} malformed configs, {len(failures)} not rejected with exit 2 and a named element")
    assert failures == []
