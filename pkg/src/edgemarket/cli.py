"""Command-line entry points.

``edgemarket run <config.toml>`` executes one experiment sweep and
writes results.csv plus a rendered PNG (and optional gnuplot series
files) into the output directory.  ``edgemarket verify`` runs the
acceptance suite and reports one pass/fail line per criterion.

Exit codes: 0 success, 1 acceptance failure, 2 configuration error,
3 numeric failure during an experiment.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .experiments import (ConfigError, format_summary, load_config,
                          run_experiment, write_csv, write_gnuplot_data)

SEED_ENV = "EDGEMARKET_SEED"


def _cmd_run(args: argparse.Namespace) -> int:
    seed_override = None
    if os.environ.get(SEED_ENV):
        try:
            seed_override = int(os.environ[SEED_ENV])
        except ValueError:
            print(f"error: {SEED_ENV} must be an integer, "
                  f"got {os.environ[SEED_ENV]!r}", file=sys.stderr)
            return 2
    try:
        config = load_config(args.config, seed_override)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        table = run_experiment(config, jobs=args.jobs)
    except RuntimeError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3

    out_dir = Path(args.out) if args.out else Path(args.config).with_suffix("")
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    write_csv(table, csv_path)
    written = [csv_path]

    from .plots import render_figure  # deferred: pulls in matplotlib
    written.append(render_figure(config.experiment, table,
                                 out_dir / f"{config.experiment}.png"))
    if args.gnuplot_data:
        written.extend(write_gnuplot_data(table, out_dir))

    print(f"experiment {config.experiment}: "
          f"{len(config.sweep_values)} sweep values x {len(config.seeds)} seeds")
    print(format_summary(table))
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    from .acceptance import run_all
    results = run_all()
    return 0 if all(r.passed for r in results) else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="edgemarket",
        description="edge-market simulator: experiment sweeps and the "
                    "acceptance suite")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config", help="path to a TOML experiment file")
    p_run.add_argument("--out", help="output directory "
                                     "(default: config path minus suffix)")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="worker processes for sweep cells")
    p_run.add_argument("--gnuplot-data", action="store_true",
                       help="also emit whitespace-separated series files")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run the acceptance suite")
    p_verify.set_defaults(func=_cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
