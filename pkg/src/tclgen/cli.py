"""Command line entry point: ``tclgen run <config>`` and ``tclgen validate <config>``.

Exit codes: 0 success, 2 malformed config (message names the field path),
3 numerical precondition failure (message names the identity).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from tclgen import __version__
from tclgen.config import ConfigError, load_config
from tclgen.dynamics import GeneratorSingularity
from tclgen.generator import IdentityViolation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tclgen", description="Perturbative TCL generators and canonical rates.")
    p.add_argument("--version", action="version", version=f"tclgen {__version__}")
    p.add_argument("--quiet", action="store_true", help="only print errors")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the configured pipeline")
    run.add_argument("config", type=Path)
    run.add_argument("--output-dir", type=Path, default=Path("tclgen-out"))
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    val = sub.add_parser("validate", help="parse and check a config without computing")
    val.add_argument("config", type=Path)
    val.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"invalid config: {exc.path}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        if not args.quiet:
            print("ok")
        return EXIT_OK
    if args.threads < 1:
        print("invalid option: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    from tclgen.runner import execute
    try:
        execute(cfg, args.output_dir, threads=args.threads)
    except IdentityViolation as exc:
        print(f"numerical failure: {exc.identity}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GeneratorSingularity as exc:
        print(f"numerical failure: map invertibility: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not args.quiet:
        print(f"wrote {args.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
