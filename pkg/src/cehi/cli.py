"""Command line entry point: ``cehi run | report | center | fronts``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import records
from .driver import fit_models
from .ensemble import EstimationConfig, estimate_center, nd_ensemble


def read_observations(path) -> tuple[np.ndarray, np.ndarray]:
    """Designs and objectives from a CSV whose header names columns ``x0..`` and ``f0..``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")
    header = rows[0]
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    fcols = [i for i, h in enumerate(header) if h.startswith("f")]
    if not xcols or not fcols:
        raise ValueError(f"{path} needs x* and f* columns, got {header}")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r])
    return data[:, xcols], data[:, fcols]


def _cmd_run(args) -> int:
    res = records.run_experiment(args.config, args.out, seed=args.seed, repeats=args.repeats,
                                 problem=args.problem, budget=args.budget)
    for name, rep in res.items():
        print(f"[{name}] {rep['runs']} runs")
        if rep["table"] is not None:
            print(records.report_text(rep["table"]), end="")
    return 0


def _cmd_report(args) -> int:
    rep = records.report(args.records, args.reference, args.out or args.records)
    if rep["table"] is None:
        print(f"{rep['runs']} runs; no reference front, metrics omitted")
    else:
        print(records.report_text(rep["table"]), end="")
    return 0


def _models_from(args):
    X, Y = read_observations(args.observations)
    return fit_models(X, Y, "matern52", seed=args.seed), Y


def _cmd_center(args) -> int:
    models, Y = _models_from(args)
    est = estimate_center(models, Y, EstimationConfig(n_sim=args.n_sim), seed=args.seed)
    lines = ["name," + ",".join(f"f{j}" for j in range(Y.shape[1]))]
    for name, v in (("ideal", est.ideal_hat), ("nadir", est.nadir_hat), ("center", est.center_hat)):
        lines.append(name + "," + ",".join(repr(float(x)) for x in v))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_fronts(args) -> int:
    models, Y = _models_from(args)
    ens = nd_ensemble(models, Y, EstimationConfig(n_sim=args.n_sim), seed=args.seed)
    lines = ["sim," + ",".join(f"f{j}" for j in range(Y.shape[1]))]
    for k, front in enumerate(ens.fronts):
        lines.extend(f"{k}," + ",".join(repr(float(x)) for x in row) for row in front)
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cehi", description="Center-targeted multi-objective Bayesian optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute an experiment from a TOML config")
    p.add_argument("--config", required=True, help="TOML file with [run] and [experiment] tables")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--problem")
    p.add_argument("--budget", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="aggregate metrics of stored run records")
    p.add_argument("--records", required=True, help="directory of run_*.csv/json records")
    p.add_argument("--reference", help="CSV of reference front objective vectors")
    p.add_argument("--out", help="where report.csv and report.txt go (default: the records directory)")
    p.set_defaults(func=_cmd_report)

    for name, func, help_ in (("center", _cmd_center, "estimate Ideal, Nadir and center from observations"),
                              ("fronts", _cmd_fronts, "write simulated fronts as CSV")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--observations", required=True, help="CSV with x0.. and f0.. columns")
        p.add_argument("--out", help="output CSV (default: stdout)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--n-sim", type=int, default=200)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cehi {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort message for the user
        print(f"cehi {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
