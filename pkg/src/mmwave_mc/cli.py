"""Command line front end: run a scenario file and write summaries/traces."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import parse_config
from .errors import ConfigError, SimAbort
from .scenario import run_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Discrete-event simulation of multi-carrier mmWave/LTE "
                    "cellular links: carrier aggregation and dual connectivity.",
    )
    p.add_argument("--config", required=True, help="scenario YAML file")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (overrides the scenario file)")
    p.add_argument("--runs", type=int, default=None,
                   help="independent runs per sweep point")
    p.add_argument("--duration", type=float, default=None,
                   help="simulated seconds per run")
    p.add_argument("--out-dir", default="results",
                   help="output directory (default: ./results)")
    p.add_argument("--traces", action="store_true",
                   help="also write per-run event trace CSVs")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.runs is not None and args.runs < 1:
        print("error: --runs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.duration is not None and args.duration <= 0:
        print("error: --duration must be > 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    def progress(variant, x, k, rr):
        if not args.quiet:
            print(f"[{cfg.name}] {variant} {cfg.sweep_parameter}={x:g} "
                  f"run {k}: s_rlc={rr.s_rlc_bps / 1e9:.3f} Gbit/s")

    try:
        summaries = run_experiment(cfg, args.out_dir, master_seed=args.seed,
                                   runs=args.runs, duration_s=args.duration,
                                   traces=args.traces, progress=progress)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimAbort as exc:
        print(f"simulation aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for variant, path in summaries.items():
        print(f"{variant}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
