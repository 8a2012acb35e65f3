"""Command-line front end: run, sweep, floor-fit and report.

    python -m spinvmc run config.txt [-o DIR]
    python -m spinvmc sweep config.txt -o ROOT
    python -m spinvmc floor-fit RUN_DIR [RUN_DIR ...] [--out FILE]
    python -m spinvmc report RUN_DIR [--window W]

Configs use the flat key-value grammar of runner.parse_config_text; the
environment variable SPINVMC_OUTPUT_ROOT re-roots relative output paths.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .runner import (
    fit_sampling_floor,
    min_grad_curve,
    parse_config_text,
    read_resolved_config,
    resolve_config,
    run_experiment,
    run_report,
    sweep_experiment,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="spinvmc")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("-o", "--output", type=Path, default=None)

    p_sweep = sub.add_parser("sweep", help="expand {a, b, ...} axes into a run grid")
    p_sweep.add_argument("config", type=Path)
    p_sweep.add_argument("-o", "--output", type=Path, required=True)

    p_fit = sub.add_parser(
        "floor-fit", help="fit sqrt(b/N_s + c/N_s^2) to run gradient floors"
    )
    p_fit.add_argument("run_dirs", nargs="+", type=Path)
    p_fit.add_argument("--out", type=Path, default=None)

    p_rep = sub.add_parser("report", help="summarize one run directory")
    p_rep.add_argument("run_dir", type=Path)
    p_rep.add_argument("--window", type=int, default=100)

    args = parser.parse_args(argv)

    if args.command == "run":
        raw = parse_config_text(args.config.read_text())
        out = run_experiment(resolve_config(raw), args.output)
        print(out)
        return 0

    if args.command == "sweep":
        raw = parse_config_text(args.config.read_text())
        for d in sweep_experiment(raw, args.output):
            print(d)
        return 0

    if args.command == "floor-fit":
        points = []
        floors = {}
        for d in args.run_dirs:
            n_s = read_resolved_config(d)["sampler"]["n_samples"]
            floor = float(min_grad_curve(d)[-1])
            points.append((n_s, floor))
            floors[str(d)] = {"n_samples": n_s, "floor": floor}
        b, c, residual = fit_sampling_floor(points)
        result = {
            "b": b,
            "c": c,
            "relative_residual": residual,
            "model": "min_grad ~ sqrt(b/N_s + c/N_s^2), fitted on squared floors",
            "floors": floors,
        }
        text = json.dumps(result, indent=2)
        if args.out:
            args.out.write_text(text + "\n")
        print(text)
        return 0

    report = run_report(args.run_dir, window=args.window)
    print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
