"""Logging latency and log volume of event-triggered vs periodic logging.

A single load spike is injected at a chosen tick; for each log period the
script reports the tick of the first log entry that carries the violation
and how many entries the run wrote.

    python3 scripts/latency_vs_period.py --spike 103 --periods 1 2 5 10 20
"""

import argparse
import dataclasses
from pathlib import Path

from mapemon.config import parse_config
from mapemon.monitor import EventTriggeredMode, PeriodicMode
from mapemon.runner import run

ROOT = Path(__file__).resolve().parents[1]


def first_logged(log, prop):
    for e in log.entries:
        if any(str(ev.property) == prop for ev in e.events):
            return e.tick
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "webshop.cfg")
    ap.add_argument("--spike", type=int, default=103, help="tick of the server_load spike")
    ap.add_argument("--periods", type=int, nargs="+", default=[1, 2, 5, 10, 20, 50])
    args = ap.parse_args()

    base = parse_config(args.config.read_text())
    events = tuple(dataclasses.replace(e, tick=args.spike) if e.gauge == "server_load" else e for e in base.script.events)
    base = dataclasses.replace(base, script=dataclasses.replace(base.script, events=events))

    rows = [("event", EventTriggeredMode())] + [(f"periodic:{p}", PeriodicMode(p)) for p in args.periods]
    print(f"{'mode':<12} {'first logged':>12} {'lag':>4} {'entries':>8}")
    for label, mode in rows:
        r = run(dataclasses.replace(base, mode=mode))
        tick = first_logged(r.log, "web/server_load")
        lag = "-" if tick is None else tick - args.spike
        print(f"{label:<12} {str(tick):>12} {lag:>4} {len(r.log):>8}")


if __name__ == "__main__":
    main()
