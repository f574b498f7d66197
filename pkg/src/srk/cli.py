"""Command-line entry point: ``srk solve | bench | verify | inspect``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .data import load_dataset
from .errors import (
    ConfigError,
    Diverged,
    EmptyDataset,
    EstimatorBreakdown,
    NonConvergence,
    NonFinite,
    ParseError,
)
from .harness import ExperimentSpec, ProblemSpec, load_config, run_experiment
from .solvers import SolverConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_SOLVER = 4
EXIT_VERIFY = 5


def _say(args, *parts) -> None:
    if not args.quiet:
        print(*parts)


def _spec_from_flags(args) -> ExperimentSpec:
    problem = ProblemSpec(kind=args.problem, n=args.n, d=args.d, gamma=args.gamma, kappa=args.kappa, path=args.data)
    method = SolverConfig(
        method=args.method,
        strategy=args.strategy,
        k=args.k,
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        record_diagnostics=args.diagnostics,
    )
    return ExperimentSpec(problem, [method], warm_start_steps=args.warm_start, output=args.output or "traces.csv")


def _run(args, spec: ExperimentSpec) -> int:
    summaries = run_experiment(spec, output=args.output, seed=args.seed)
    for s in summaries:
        _say(
            args,
            f"{s.method:12s} k={s.k:<3d} seed={s.seed:<3d} iters={s.iterations:<4d} "
            f"{s.stop_reason:9s} |grad|={s.final_grad_norm:.3e} time={s.wall_seconds:.3f}s",
        )
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = load_config(args.config) if args.config else _spec_from_flags(args)
    if args.config:
        spec.methods = spec.methods[:1]
        spec.repetitions = 1
    return _run(args, spec)


def cmd_bench(args) -> int:
    return _run(args, load_config(args.config))


def cmd_verify(args) -> int:
    from .verify import run_suite

    results = run_suite(seed=args.seed or 0, trials=args.trials, samples=args.samples)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_inspect(args) -> int:
    ds = load_dataset(args.path)
    prob = ds.problem(args.gamma)
    mu, lip = prob.mu, prob.lip_l
    labels, counts = np.unique(ds.labels, return_counts=True)
    info = {
        "n": ds.n,
        "d": ds.d,
        "nnz": ds.nnz,
        "labels": {f"{lab:+g}": int(c) for lab, c in zip(labels, counts)},
        "gamma": args.gamma,
        "mu": mu,
        "L": lip,
        "kappa": lip / mu,
    }
    print(json.dumps(info, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed (overrides the config)")
    common.add_argument("--output", default=None, help="CSV trace path")
    common.add_argument("--quiet", action="store_true", help="suppress per-run summaries")

    p = argparse.ArgumentParser(prog="srk", description="Block quasi-Newton solvers and benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true", help="enable debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common], help="run one method on one problem")
    s.add_argument("--config", help="experiment file; only its first method is run")
    s.add_argument("--problem", choices=["synthetic", "quadratic", "dataset"], default="synthetic")
    s.add_argument("--data", help="dataset path for --problem dataset")
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--d", type=int, default=50)
    s.add_argument("--gamma", type=float, default=0.01)
    s.add_argument("--kappa", type=float, default=100.0)
    s.add_argument("--method", default="srk")
    s.add_argument("--strategy", default="greedy")
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--max-iters", type=int, default=100)
    s.add_argument("--grad-tol", type=float, default=1e-9)
    s.add_argument("--warm-start", type=int, default=0)
    s.add_argument("--diagnostics", action="store_true", help="record tau, sigma and eta each step")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", parents=[common], help="sweep methods and seeds from a config file")
    b.add_argument("--config", required=True)
    b.set_defaults(func=cmd_bench)

    v = sub.add_parser("verify", parents=[common], help="run the update-level contraction suites")
    v.add_argument("--trials", type=int, default=2000)
    v.add_argument("--samples", type=int, default=10_000)
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("inspect", parents=[common], help="print dataset statistics")
    i.add_argument("path")
    i.add_argument("--gamma", type=float, default=0.01)
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, EmptyDataset, OSError) as exc:
        print(f"dataset error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except (Diverged, EstimatorBreakdown, NonFinite, NonConvergence) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
