"""Sampling work and detection lag: fixed periods vs frequency modulation.

For several seeds and spike positions, runs the single-gauge adaptive
scenario with the sensor fixed at p_min, fixed at p_max, and under the
frequency policy, then prints mean measurements and mean detection lag.

    python3 scripts/adaptive_overhead.py --runs 20
"""

import argparse
import dataclasses
import random
import statistics
from pathlib import Path

from mapemon.config import parse_config
from mapemon.runner import run
from mapemon.sensing import TimeTriggered

ROOT = Path(__file__).resolve().parents[1]


def with_spike(cfg, seed, tick):
    events = tuple(dataclasses.replace(e, tick=tick) for e in cfg.script.events)
    return dataclasses.replace(cfg, script=dataclasses.replace(cfg.script, seed=seed, events=events))


def fixed(cfg, period):
    sensors = tuple(dataclasses.replace(s, mode=TimeTriggered(period)) for s in cfg.sensors)
    return dataclasses.replace(cfg, sensors=sensors, policy=None)


def lag(result, spike_tick):
    ticks = [ev.tick for ev in result.controller.events_detected if ev.tick >= spike_tick]
    return min(ticks) - spike_tick if ticks else None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "adaptive.cfg")
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    base = parse_config(args.config.read_text())
    pol = base.policy
    rng = random.Random(args.seed)
    span = base.script.duration - 50
    variants = {f"fixed:{pol.p_min}": [], f"fixed:{pol.p_max}": [], "frequency": []}
    for _ in range(args.runs):
        seed, tick = rng.getrandbits(32), rng.randrange(1, span)
        cfg = with_spike(base, seed, tick)
        for name, variant in ((f"fixed:{pol.p_min}", fixed(cfg, pol.p_min)), (f"fixed:{pol.p_max}", fixed(cfg, pol.p_max)), ("frequency", cfg)):
            r = run(variant)
            variants[name].append((r.controller.measurements_taken, lag(r, tick)))

    print(f"{'variant':<10} {'measurements':>12} {'mean lag':>9} {'max lag':>8}")
    for name, rows in variants.items():
        lags = [g for _, g in rows if g is not None]
        print(f"{name:<10} {statistics.mean(m for m, _ in rows):>12.1f} {statistics.mean(lags):>9.2f} {max(lags):>8}")


if __name__ == "__main__":
    main()
