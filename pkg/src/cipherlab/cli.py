"""Command-line entry point: ``cipherlab {sweep,min-key,plot,check}``."""
from __future__ import annotations

import argparse
import logging
import sys

from .checks import SUITES
from .experiment import (
    ConfigError,
    emit_plots,
    find_min_key,
    load_config,
    read_rows,
    resolve_workers,
    run_sweep,
)
from .typemethod import CapExceeded

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_CAP = 3


def _sweep(args) -> int:
    cfg = load_config(args.config)
    result = run_sweep(cfg, workers=args.workers or resolve_workers(cfg))
    result.write_csv(args.out)
    manifest = args.manifest or f"{args.out}.manifest.jsonl"
    result.write_manifest(manifest)
    for agg in result.aggregate():
        print(f"{agg['schedule']:>14} n={agg['n']:<3} k={agg['k']:<5} mean={agg['mean']:.6f} min={agg['min']:.6f}")
    for cell, err in result.errors:
        print(f"cell n={cell['n']} k={cell['k']} seed={cell['seed']} failed: {err}", file=sys.stderr)
    print(f"wrote {len(result.rows)} rows to {args.out}")
    return EXIT_CAP if result.errors else EXIT_OK


def _min_key(args) -> int:
    cfg = load_config(args.config)
    grid = [int(v) for v in args.grid.split(",")] if args.grid else None
    k = find_min_key(cfg, args.n, args.target, grid, workers=args.workers)
    print("none" if k is None else k)
    return EXIT_OK


def _plot(args) -> int:
    rows = read_rows(args.inp)
    try:
        paths = emit_plots(rows, args.out)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _check(args) -> int:
    results = SUITES[args.suite]()
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.ok for r in results) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cipherlab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a configured sweep and write CSV rows")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--manifest", help="per-cell manifest path (default: <out>.manifest.jsonl)")
    s.add_argument("--workers", type=int)
    s.set_defaults(func=_sweep)

    m = sub.add_parser("min-key", help="smallest key count reaching a target distortion")
    m.add_argument("--config", required=True)
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--target", type=float, required=True)
    m.add_argument("--grid", help="comma-separated ascending key counts (default: config k_grid)")
    m.add_argument("--workers", type=int)
    m.set_defaults(func=_min_key)

    pl = sub.add_parser("plot", help="SVG charts from a sweep CSV")
    pl.add_argument("--in", dest="inp", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=_plot)

    c = sub.add_parser("check", help="run a built-in verification suite")
    c.add_argument("--suite", choices=sorted(SUITES), required=True)
    c.set_defaults(func=_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as e:
        print(f"cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
