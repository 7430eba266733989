"""Two-stage monitoring vs watching the extended set all the time.

Moves the load spike across the scenario and compares measurements taken
and the tick at which the core metric violation is first detected.

    python3 scripts/stage_sweep.py --step 25
"""

import argparse
import dataclasses
from pathlib import Path

from mapemon.config import parse_config
from mapemon.runner import run

ROOT = Path(__file__).resolve().parents[1]


def core_detection(result, name="server_load"):
    ticks = [ev.tick for ev in result.controller.events_detected if ev.property.name == name]
    return min(ticks) if ticks else None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "stages.cfg")
    ap.add_argument("--step", type=int, default=25)
    args = ap.parse_args()

    base = parse_config(args.config.read_text())
    print(f"{'spike':>5} {'staged meas':>11} {'full meas':>9} {'staged det':>10} {'full det':>8}  stages")
    for tick in range(5, base.script.duration - 20, args.step):
        events = tuple(dataclasses.replace(e, tick=tick) if e.gauge == "server_load" else e for e in base.script.events)
        cfg = dataclasses.replace(base, script=dataclasses.replace(base.script, events=events))
        staged = run(cfg)
        full = run(dataclasses.replace(cfg, policy=None))
        trace = " ".join(f"{t}:{s}" for t, s in staged.report.stage_trace)
        print(
            f"{tick:>5} {staged.controller.measurements_taken:>11} {full.controller.measurements_taken:>9} "
            f"{str(core_detection(staged)):>10} {str(core_detection(full)):>8}  {trace}"
        )


if __name__ == "__main__":
    main()
