"""Command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, build_config, parse_config
from .runner import COMMANDS, EXIT_CONFIG, run

MMS_ONLY_CONFIG = {"grid": {"dim": 1, "extents": [1.0], "counts": [33]}, "time": {"T": 1.0, "steps": 16}}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chsparse", description="Sparse optimal control of a phase-field tumour model")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH", required=name != "mms", help="YAML experiment config")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output.dir)")
        p.add_argument("--seed", metavar="N", type=int, help="random seed (overrides config)")
        p.add_argument("--verbose", "-v", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config) if args.config else build_config(MMS_ONLY_CONFIG)
        cfg = cfg.with_overrides(seed=args.seed, out_dir=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
