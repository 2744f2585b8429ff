"""Command-line entry point: run one experiment, write CSV and a figure."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments import EXPERIMENT_NAMES, EXPERIMENTS, ConfigError, load_config, resolve_config, write_csv
from . import plots

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rinlab",
        description="Simulate an intensity-modulated optical link and estimate achievable rates.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in EXPERIMENT_NAMES:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file; flags below override its fields")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help=f"output CSV path (default {name}.csv)")
        p.add_argument("--mode", choices=("waveform", "surrogate"), help="channel sampling mode")
        p.add_argument("--bins", type=int, help="bin histogram output into this many bins")
        p.add_argument("--workers", type=int, help="parallel sweep-point workers")
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config) if args.config else {}
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    overrides = {
        "seed": args.seed,
        "out": args.out,
        "mode": args.mode,
        "bins": args.bins,
        "workers": args.workers,
    }
    try:
        cfg = resolve_config(args.experiment, raw, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = EXPERIMENTS[args.experiment](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    out_path = Path(cfg.out or f"{args.experiment}.csv")
    try:
        write_csv(str(out_path), result)
    except OSError as exc:
        print(f"error: cannot write {out_path}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out_path}")

    if not args.no_plot:
        fig_path = out_path.with_suffix(".png")
        try:
            plots.render(result, str(fig_path))
        except OSError as exc:
            print(f"error: cannot write {fig_path}: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"wrote {fig_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
