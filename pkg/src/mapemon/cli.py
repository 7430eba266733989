"""Command line entry point: ``mapemon {run,compare,validate}``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from mapemon.config import RunConfig, parse_config
from mapemon.errors import ConfigurationError, MonitorError
from mapemon.monitor import parse_mode
from mapemon.runner import (
    compare,
    format_comparison,
    format_report,
    parse_variant,
    run,
    with_overrides,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _mode_arg(text: str):
    try:
        return parse_mode(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _variant_arg(text: str):
    try:
        return parse_variant(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mapemon", description="Runtime monitoring scenarios on a simulated managed system.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path, help="scenario configuration document")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--ticks", type=int, help="override the scenario duration")

    p_run = sub.add_parser("run", help="run one scenario and write its .ndlog")
    common(p_run)
    p_run.add_argument("--out", type=Path, help="log file (default: config output, else <config>.ndlog)")
    p_run.add_argument("--mode", type=_mode_arg, help="override the monitoring mode: event | periodic:<p>")
    p_run.add_argument("--realtime", type=float, metavar="MS", help="sleep MS milliseconds per tick")

    p_cmp = sub.add_parser("compare", help="run several modes/policies on the same script")
    common(p_cmp)
    p_cmp.add_argument("--mode", type=_mode_arg, action="append", default=[], help="a mode to compare (repeatable)")
    p_cmp.add_argument(
        "--variant",
        type=_variant_arg,
        action="append",
        default=[],
        help="MODE[/POLICY] with MODE event|periodic:<p>|config and POLICY config|none|fixed:<p> (repeatable)",
    )

    p_val = sub.add_parser("validate", help="check a configuration document")
    p_val.add_argument("--config", required=True, type=Path)
    return parser


def _load(args) -> RunConfig:
    text = args.config.read_text(encoding="utf-8")
    config = parse_config(text)
    return with_overrides(config, seed=getattr(args, "seed", None), duration=getattr(args, "ticks", None))


def _default_out(config_path: Path, config: RunConfig) -> Path:
    # a relative output path in the document is relative to the document itself
    if config.output_path:
        return config_path.parent / config.output_path
    return config_path.with_suffix(".ndlog")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = _load(args)
        if args.command == "validate":
            print(f"{args.config}: ok ({len(config.properties)} properties, {len(config.sensors)} sensors)")
            return EXIT_OK

        if args.command == "run":
            if args.mode is not None:
                config = with_overrides(config, mode=args.mode)
            out = args.out or _default_out(args.config, config)
            result = run(config, out=out, realtime_ms=args.realtime)
            print(format_report(result.report))
            print(f"\nlog written to {out}")
            return EXIT_OK

        variants = [parse_variant(str(m)) for m in args.mode] + list(args.variant)
        if len(variants) < 2:
            parser.error("compare needs at least two --mode/--variant values")
        print(format_comparison(compare(config, variants)))
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except MonitorError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
