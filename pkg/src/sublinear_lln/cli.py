"""Command line entry point.

Flags:

``--config PATH``  JSON config file, or the name of a shipped fixture.
``--out-dir PATH`` replaces ``output_dir`` from the config.
``--seed U64``     replaces ``budget.seed``; part of the config hash.
``--jobs N``       worker threads for the search; results do not depend on it.
``--quick``        divides ``budget.mc_reps`` by 10 (integer division, floor
                   100); recorded in the config hash.

Exit status: 0 all conditions passed, 3 at least one condition failed
(the run still completes), 4 execution error, 2 bad arguments or config.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import fixture_names, load_config
from .errors import ParseError, ValidationError
from .runner import run

EXIT_BAD_CONFIG = 2


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sublinear-lln", description="Run a capacity convergence experiment.")
    p.add_argument("--config", help="config JSON path or shipped fixture name")
    p.add_argument("--out-dir", help="output directory (overrides the config)")
    p.add_argument("--seed", type=_u64, help="unsigned 64-bit seed (overrides the config)")
    p.add_argument("--jobs", type=_positive, help="worker threads")
    p.add_argument("--quick", action="store_true", help="divide mc_reps by 10 for smoke runs")
    p.add_argument("--list-fixtures", action="store_true", help="print shipped fixture names and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.list_fixtures:
        print("\n".join(fixture_names()))
        return 0
    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_BAD_CONFIG
    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out_dir, jobs=args.jobs, quick=args.quick)
    except (ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    manifest = run(cfg)
    line = f"{cfg.name}: {manifest.status} ({manifest.total_seconds:.1f} s) -> {cfg.output_dir}"
    if manifest.error:
        line += f"\n  {manifest.failed_stage}: {manifest.error}"
    print(line)
    return manifest.exit_code
