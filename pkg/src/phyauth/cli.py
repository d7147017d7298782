"""Command-line entry point: ``phyauth run | list-presets | validate``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import PhyAuthError, SchemaError
from .experiments import OUT_ENV, PRESETS, default_output_dir, resolve_config, run_experiment


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _formats(text: str) -> list[str]:
    fmts = [f.strip() for f in text.split(",") if f.strip()]
    bad = [f for f in fmts if f not in ("csv", "svg")]
    if bad or not fmts:
        raise argparse.ArgumentTypeError("formats are a comma list of csv and svg")
    return fmts


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phyauth", description="Multi-attribute physical-layer authentication experiments.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset, a config file, or 'all' presets")
    run.add_argument("target", help="preset name, path to a config JSON, or 'all'")
    run.add_argument("--out", default=None, help=f"output directory (default: ${OUT_ENV} or ./phyauth-out)")
    run.add_argument("--seed", type=_seed, default=None)
    run.add_argument("--jobs", type=_positive, default=1, help="parallel worker processes")
    run.add_argument("--trials", type=_positive, default=None, help="Monte Carlo count (params.mc_trials)")
    run.add_argument("--format", type=_formats, default=["csv", "svg"], dest="formats")

    sub.add_parser("list-presets", help="list preset names")

    val = sub.add_parser("validate", help="check a config JSON (or preset) and print the resolved config")
    val.add_argument("target")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "list-presets":
            for p in PRESETS.values():
                print(f"{p.name:28s} {p.description}")
            return 0
        if args.command == "validate":
            cfg = resolve_config(args.target)
            print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
            return 0
        targets = list(PRESETS) if args.target == "all" else [args.target]
        out = args.out if args.out is not None else default_output_dir()
        for t in targets:
            m = run_experiment(t, out, seed=args.seed, trials=args.trials, jobs=args.jobs, formats=args.formats)
            print(f"{m['preset']}: {len(m['files'])} files, {m['wall_time_s']} s")
        return 0
    except SchemaError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except PhyAuthError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
