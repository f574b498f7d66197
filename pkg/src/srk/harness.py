"""Experiment configuration, method sweeps and trace output."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .data import load_dataset, synth_logistic
from .errors import ConfigError
from .objectives import Objective, random_quadratic
from .solvers import IterationRecord, SolverConfig, gradient_descent, run

CSV_HEADER = ["method", "k", "seed", "t", "lambda", "grad_norm", "r_t", "elapsed_seconds", "tau", "sigma", "eta"]


@dataclass
class ProblemSpec:
    kind: str = "synthetic"  # synthetic | quadratic | dataset
    n: int = 500
    d: int = 50
    gamma: float = 0.01
    kappa: float = 100.0
    path: str | None = None
    sc_m: float = 1.0

    def build(self, seed: int) -> Objective:
        if self.kind == "synthetic":
            return synth_logistic(self.n, self.d, seed, self.gamma, sc_m=self.sc_m)
        if self.kind == "quadratic":
            return random_quadratic(self.d, self.kappa, seed)
        if self.kind == "dataset":
            if not self.path:
                raise ConfigError("dataset problem needs a path")
            return load_dataset(self.path).problem(self.gamma, self.sc_m)
        raise ConfigError(f"unknown problem kind {self.kind!r}")


@dataclass
class ExperimentSpec:
    problem: ProblemSpec
    methods: list[SolverConfig]
    warm_start_steps: int = 0
    output: str = "traces.csv"
    repetitions: int = 1
    seed: int = 0

    def validate(self) -> None:
        if not self.methods:
            raise ConfigError("experiment needs at least one method")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")
        if self.warm_start_steps < 0:
            raise ConfigError("warm_start_steps must be nonnegative")


_PROBLEM_KEYS = {f.name: f.type for f in fields(ProblemSpec)}
_SOLVER_KEYS = {f.name for f in fields(SolverConfig)}


def _coerce(value: str, typ):
    if typ in ("bool", bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if typ in ("int", int):
        return int(value)
    if typ in ("float", float):
        return float(value)
    if "float" in str(typ) and "None" in str(typ):
        return None if value.strip().lower() in ("", "none") else float(value)
    if "str" in str(typ) and "None" in str(typ):
        return value or None
    return value


def parse_config(text: str, base_dir: str | os.PathLike = ".") -> ExperimentSpec:
    """Read an INI-style experiment file.

    ``[experiment]`` holds problem and run settings; every ``[method.<name>]``
    section becomes one solver configuration.
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    exp = dict(cp["experiment"])
    try:
        problem_kw = {}
        for key in list(exp):
            name = "kind" if key == "problem" else key
            if name in _PROBLEM_KEYS:
                problem_kw[name] = _coerce(exp.pop(key), _PROBLEM_KEYS[name])
        problem = ProblemSpec(**problem_kw)
        if problem.path and not os.path.isabs(problem.path):
            problem.path = str(Path(base_dir) / problem.path)
        warm = int(exp.pop("warm_start_steps", 0))
        reps = int(exp.pop("repetitions", 1))
        seed = int(exp.pop("seed", 0))
        output = exp.pop("output", "traces.csv")
        if exp:
            raise ConfigError(f"unknown experiment keys: {sorted(exp)}")
        methods = []
        for section in cp.sections():
            if not section.startswith("method"):
                continue
            kw = {}
            for key, raw in cp[section].items():
                if key not in _SOLVER_KEYS:
                    raise ConfigError(f"[{section}] unknown key {key!r}")
                typ = next(f.type for f in fields(SolverConfig) if f.name == key)
                kw[key] = _coerce(raw, typ)
            methods.append(SolverConfig(**kw))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    spec = ExperimentSpec(problem, methods, warm, output, reps, seed)
    spec.validate()
    return spec


def load_config(path: str | os.PathLike) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=path.parent)


# --- trace serialization -------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def trace_rows(label: str, k: int, seed: int, records: list[IterationRecord]) -> list[list[str]]:
    return [
        [
            label,
            str(k),
            str(seed),
            str(r.t),
            _fmt(r.lam),
            _fmt(r.grad_norm),
            _fmt(r.r_t),
            _fmt(r.elapsed_seconds),
            _fmt(r.tau),
            _fmt(r.sigma),
            _fmt(r.eta),
        ]
        for r in records
    ]


def write_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    """Parse a trace file back into typed rows."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed = {"method": row["method"], "k": int(row["k"]), "seed": int(row["seed"]), "t": int(row["t"])}
            for key in CSV_HEADER[4:]:
                parsed[key] = float(row[key]) if row[key] != "" else None
            out.append(parsed)
    return out


# --- running -----------------------------------------------------------------------------


@dataclass
class RunSummary:
    method: str
    k: int
    seed: int
    iterations: int
    converged: bool
    stop_reason: str
    final_grad_norm: float
    wall_seconds: float
    records: list[IterationRecord] = field(repr=False, default_factory=list)

    def as_json(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "seed": self.seed,
            "iterations": self.iterations,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "final_grad_norm": self.final_grad_norm,
            "wall_seconds": self.wall_seconds,
        }


def run_one(oracle: Objective, config: SolverConfig, warm_start_steps: int = 0, x0=None) -> RunSummary:
    x0 = np.zeros(oracle.dim) if x0 is None else x0
    if warm_start_steps:
        x0 = gradient_descent(oracle, x0, warm_start_steps)
    records = run(oracle, config, x0)
    last = records[-1]
    k = 0 if config.method.value == "newton" else config.k
    return RunSummary(
        method=config.label,
        k=k,
        seed=config.seed,
        iterations=last.t,
        converged=last.stop_reason in ("grad_tol", "lam_tol"),
        stop_reason=last.stop_reason,
        final_grad_norm=last.grad_norm,
        wall_seconds=last.elapsed_seconds,
        records=records,
    )


def run_experiment(spec: ExperimentSpec, output: str | None = None, seed: int | None = None) -> list[RunSummary]:
    """Run every method for every repetition and write the CSV plus a summary JSON.

    Repetition ``i`` uses seed ``base + i`` for both the problem instance and the
    solver's direction stream.
    """
    spec.validate()
    base = spec.seed if seed is None else seed
    out_path = Path(output or spec.output)
    summaries: list[RunSummary] = []
    rows: list[list[str]] = []
    problems = {}
    for cfg in spec.methods:
        for rep in range(spec.repetitions):
            s = base + rep
            if s not in problems:
                problems[s] = spec.problem.build(s)
            cfg_s = dataclasses.replace(cfg, seed=s)
            summary = run_one(problems[s], cfg_s, spec.warm_start_steps)
            summaries.append(summary)
            rows.extend(trace_rows(summary.method, summary.k, s, summary.records))
    if out_path.parent and not out_path.parent.exists():
        out_path.parent.mkdir(parents=True)
    write_csv(out_path, rows)
    with open(summary_path(out_path), "w", encoding="utf-8") as fh:
        json.dump({"runs": [s.as_json() for s in summaries]}, fh, indent=2)
        fh.write("\n")
    return summaries


def summary_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".summary.json")


def median_iterations(summaries: list[RunSummary], label: str) -> float:
    its = [s.iterations if s.converged else math.inf for s in summaries if s.method == label]
    return float(np.median(its))
