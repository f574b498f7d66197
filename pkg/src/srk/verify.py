"""Update-level verification suite behind ``srk verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import cholesky, gaussian_block, loewner_bounds, spawn_rng
from .metrics import UpdateKind, contraction_sweep, projector_mean, random_pair
from .updates import block_bfgs, block_dfp, sr_k, update_l


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_greedy_srk(seed: int, n_instances: int = 200, d: int = 30, ks=(1, 5, 15, 29)) -> CheckResult:
    worst = -np.inf
    for k in ks:
        rep = contraction_sweep(UpdateKind.SRK_GREEDY, d, k, 100.0, n_instances, seed)
        worst = max(worst, rep.max_ratio - rep.theory_bound)
    return CheckResult("greedy SR-k trace contraction", worst <= 1e-8, f"max(ratio - (1-k/d)) = {worst:.3e}")


def check_sweeps(kind: UpdateKind, seed: int, trials: int, d: int, ks, kappas) -> CheckResult:
    reports = [contraction_sweep(kind, d, k, kappa, trials, seed) for kappa in kappas for k in ks]
    worst = max(r.mean_ratio - r.theory_bound - r.slack for r in reports)
    return CheckResult(
        f"{kind.value} mean contraction",
        all(r.passed for r in reports),
        f"worst margin {worst:+.4f} over {len(reports)} sweeps",
    )


def check_projector(seed: int, samples: int, d: int = 50, ks=(1, 10, 25)) -> CheckResult:
    errs = [np.max(np.abs(projector_mean(d, k, samples, seed) - (k / d) * np.eye(d))) for k in ks]
    return CheckResult("projector expectation", max(errs) <= 0.02, f"max entry error {max(errs):.4f}")


def check_sandwich(seed: int, n_instances: int = 500, max_d: int = 20) -> CheckResult:
    ops = {
        "sr_k": lambda g, a, u: sr_k(g, a, u),
        "block_bfgs": block_bfgs,
        "block_dfp": block_dfp,
    }
    lo_worst, hi_worst = np.inf, -np.inf
    for i in range(n_instances):
        rng = spawn_rng(seed, 7, i)
        eta = (1.5, 4.0)[i % 2]
        d = int(rng.integers(2, max_d + 1))
        a, g = random_pair(d, 50.0, eta, rng)
        k = int(rng.integers(1, d + 1))
        u = gaussian_block(d, k, rng)
        outs = [op(g, a, u) for op in ops.values()]
        c = cholesky(g).lower
        l = np.linalg.solve(c, np.eye(d))
        outs.append(block_bfgs(g, a, l.T @ u))
        for out in outs:
            lo, hi = loewner_bounds(out, a)
            lo_worst = min(lo_worst, lo - 1.0)
            hi_worst = max(hi_worst, hi - eta)
    ok = lo_worst >= -1e-8 and hi_worst <= 1e-8
    return CheckResult("Loewner sandwich preservation", ok, f"min(lo-1)={lo_worst:.2e} max(hi-eta)={hi_worst:.2e}")


def check_factor(seed: int, n_instances: int = 500) -> CheckResult:
    worst = 0.0
    for i in range(n_instances):
        rng = spawn_rng(seed, 11, i)
        d = int(rng.integers(2, 21))
        k = int(rng.integers(1, d + 1))
        a, g = random_pair(d, 20.0, 3.0, rng)
        l = np.linalg.solve(cholesky(g).lower, np.eye(d))
        u = gaussian_block(d, k, rng)
        lp = update_l(l, a, u)
        hp = np.linalg.inv(block_bfgs(g, a, l.T @ u))
        worst = max(worst, np.linalg.norm(lp.T @ lp - hp) / np.linalg.norm(hp))
    return CheckResult("inverse factor consistency", worst <= 1e-6, f"max relative error {worst:.2e}")


def run_suite(seed: int = 0, trials: int = 2000, samples: int = 10_000) -> list[CheckResult]:
    return [
        check_greedy_srk(seed),
        check_sweeps(UpdateKind.SRK_RANDOMIZED, seed, trials, 30, (1, 5, 15), (100.0,)),
        check_projector(seed, samples),
        check_sandwich(seed),
        check_sweeps(UpdateKind.BFGS, seed, trials, 30, (1, 5), (10.0, 100.0)),
        check_sweeps(UpdateKind.DFP, seed, trials, 30, (1, 5), (10.0, 100.0)),
        check_sweeps(UpdateKind.SCALED_BFGS, seed, trials, 30, (1, 5), (10.0, 100.0)),
        check_factor(seed),
    ]


__all__ = ["CheckResult", "run_suite"]
