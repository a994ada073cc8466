"""Command line entry point: ``rmhng run | timing | validate``.

Exit status is 0 on success, 2 for a bad config or arguments, 3 for bad data.
Log verbosity comes from ``RMHNG_LOG_LEVEL`` (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, FeatureFileError, NotPositiveDefiniteError, DegenerateDistributionError
from .harness import (
    TIMING_FIELDS,
    emit_outputs,
    load_config,
    loglog_slope,
    run_experiment,
    run_timing_sweep,
    write_csv,
)
from .data import load_feature_file

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3

log = logging.getLogger("rmhng")


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmhng", description="Recursive MH naming game experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the configured methods and write CSV summaries")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--method", action="append", help="restrict to this method (repeatable or comma-separated)")
    run.add_argument("--seed", type=_seed)
    run.add_argument("--out", type=Path, help="output directory (overrides the config)")
    run.add_argument("--plots", action="store_true", help="also write SVG figures")

    timing = sub.add_parser("timing", help="time one game iteration over a (T, M) grid")
    timing.add_argument("--config", required=True, type=Path)
    timing.add_argument("--t", type=_int_list, default=[1, 2, 3, 4])
    timing.add_argument("--m", type=_int_list, default=[1, 2, 3])
    timing.add_argument("--runs", type=int, default=3)
    timing.add_argument("--iterations", type=int, default=10)
    timing.add_argument("--engine", choices=["vectorized", "per_object"], default="vectorized")
    timing.add_argument("--out", type=Path)
    timing.add_argument("--plots", action="store_true")

    validate = sub.add_parser("validate", help="check a feature CSV and report its layout")
    validate.add_argument("--features", required=True, type=Path)
    validate.add_argument("--agents", type=int)
    validate.add_argument("--dim", type=int)
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.method:
        config = config.with_methods([m for group in args.method for m in group.split(",") if m.strip()])
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    table = run_experiment(config)
    files = emit_outputs(table, args.out, plots=args.plots or None)
    for r in table.summary:
        if r["agent"] == "all":
            print(f"{r['method']:<18} ARI {r['ari_mean']:.3f}±{r['ari_std']:.3f}  "
                  f"kappa {r['kappa_mean']:.3f}±{r['kappa_std']:.3f}  agreement {r['agreement']:.3f}")
    print(f"wrote {', '.join(str(p) for p in files.values())}")
    return EXIT_OK


def _cmd_timing(args) -> int:
    config = load_config(args.config)
    if args.runs < 1 or args.iterations < 1:
        raise ConfigError("--runs and --iterations must be positive")
    rows = run_timing_sweep(config, args.t, args.m, runs=args.runs, iterations=args.iterations,
                            vectorized=args.engine == "vectorized")
    out = Path(args.out if args.out is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_csv(out / "timing.csv", rows, TIMING_FIELDS)
    for r in rows:
        print(f"T={r['T']} M={r['M']} {r['method']:<10} {r['seconds_per_iteration']:.5f} s/iteration")
    if len(args.t) > 1:
        for m in args.m:
            pts = [(r["T"], r["seconds_per_iteration"]) for r in rows if r["M"] == m]
            print(f"M={m}: log-log slope vs T = {loglog_slope(*zip(*pts)):.2f}")
    if args.plots:
        from .plots import plot_timing

        plot_timing(path, out / "timing.svg")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    ds = load_feature_file(args.features, n_agents=args.agents, dim=args.dim)
    labels = f", {ds.n_classes} labelled classes" if ds.ground_truth is not None else ", unlabelled"
    print(f"{args.features}: {ds.n_agents} agents, {ds.n_objects} objects, dim {ds.dim}{labels}")
    return EXIT_OK


def main(argv=None) -> int:
    level = os.environ.get("RMHNG_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handlers = {"run": _cmd_run, "timing": _cmd_timing, "validate": _cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FeatureFileError, NotPositiveDefiniteError, DegenerateDistributionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
