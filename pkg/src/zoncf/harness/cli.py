"""Command line entry point: ``zoncf run | check | plot``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import config as cfg
from .invariants import SUITES, report_json, run_suite
from .plotting import STYLES, PlotError, emit_plot
from .runner import run_experiment


def parse_seeds(text: str) -> list:
    """``"0,1,4"`` or ``"0-4"`` (inclusive) or a mix of both."""
    seeds: list = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zoncf", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", type=Path)
    run.add_argument("--seeds", type=parse_seeds, help="e.g. 0-4 or 0,2,3")
    run.add_argument("--budget", type=int, help="query budget per run")
    run.add_argument("--out", type=Path, help="output directory")
    run.add_argument("--preset", choices=("theory", "practical"))
    run.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    run.add_argument("--style", choices=STYLES, default="linear", help="plot style")

    chk = sub.add_parser("check", help="run invariant suites")
    chk.add_argument("suite", nargs="?", default="all", choices=SUITES + ("all",))
    chk.add_argument("--out", type=Path, help="write the JSON report here")

    plot = sub.add_parser("plot", help="plot trajectory CSVs in a directory")
    plot.add_argument("dir", type=Path)
    plot.add_argument("--out", type=Path, help="SVG path (default <dir>/convergence.svg)")
    plot.add_argument("--style", choices=STYLES, default="linear")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            conf = cfg.load(args.config)
            res = run_experiment(conf, args.out, seeds=args.seeds, budget=args.budget,
                                 preset=args.preset, workers=args.workers, plot=False)
            emit_plot([p.csv_path for p in res.pairs], res.out_dir / "convergence.svg",
                      style=args.style, title=conf.name)
            for p in res.pairs:
                print(f"{p.label:>16} seed={p.seed} {p.termination:<18} queries={p.queries} f={p.final_f:.6g}")
            print(f"wrote {res.summary_path}")
            return 0
        if args.command == "check":
            checks = run_suite(args.suite)
            for c in checks:
                print(c.line())
            text = report_json(checks, str(args.out) if args.out else None)
            if not args.out:
                print(text)
            return 0 if all(c.passed for c in checks) else 1
        if args.command == "plot":
            out = emit_plot(args.dir, args.out or args.dir / "convergence.svg", style=args.style)
            print(f"wrote {out}")
            return 0
    except (cfg.ConfigError, PlotError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 1


if __name__ == "__main__":
    sys.exit(main())
