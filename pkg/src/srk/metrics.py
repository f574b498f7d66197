"""Diagnostics: sandwich constants, Monte-Carlo contraction sweeps, rate estimates."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientData
from .matcore import cholesky, gaussian_block, loewner_bounds, spawn_rng, symmetrize, top_k_diag_basis
from .updates import block_bfgs, block_dfp, sigma, sr_k, tau

LAMBDA_FLOOR = 1e-13


def eta_diagnostic(g, h) -> float:
    """Smallest ``eta`` with ``g <= eta * h``."""
    return loewner_bounds(g, h)[1]


def random_spd(d: int, kappa: float, rng: np.random.Generator, mu: float = 1.0) -> np.ndarray:
    """``Q diag(lam) Q^T`` with log-uniform spectrum spanning exactly ``[mu, mu * kappa]``."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    lam = mu * np.exp(rng.uniform(0.0, np.log(kappa), d))
    lam[0] = mu
    if d > 1:
        lam[1] = mu * kappa
    return symmetrize((q * lam) @ q.T)


def random_pair(d: int, kappa: float, eta: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Target ``A`` and estimator ``G = A + c B B^T`` scaled so that ``A <= G <= eta A`` is tight."""
    a = random_spd(d, kappa, rng)
    b = rng.standard_normal((d, d))
    resid = b @ b.T
    top = loewner_bounds(resid, a)[1]
    return a, symmetrize(a + (eta - 1.0) / top * resid)


class UpdateKind(str, enum.Enum):
    SRK_GREEDY = "srk_greedy"
    SRK_RANDOMIZED = "srk_randomized"
    BFGS = "bfgs"
    DFP = "dfp"
    SCALED_BFGS = "scaled_bfgs"


def theory_bound(kind: UpdateKind, d: int, k: int, kappa: float) -> float:
    if kind in (UpdateKind.BFGS, UpdateKind.DFP):
        return 1.0 - k / (d * kappa)
    return 1.0 - k / d


@dataclass
class ContractionReport:
    kind: UpdateKind
    d: int
    k: int
    kappa: float
    n_trials: int
    mean_ratio: float
    max_ratio: float
    theory_bound: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.mean_ratio <= self.theory_bound + self.slack

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.kind.value:15s} d={self.d} k={self.k} kappa={self.kappa:g} N={self.n_trials}: "
            f"mean={self.mean_ratio:.4f} max={self.max_ratio:.4f} bound={self.theory_bound:.4f}+{self.slack:.4f}"
        )


def one_trial(kind: UpdateKind, a, g, k: int, rng: np.random.Generator) -> float:
    """Progress ratio of a single update: tau for SR-k, sigma for BFGS/DFP."""
    d = a.shape[0]
    if kind is UpdateKind.SRK_GREEDY:
        u = top_k_diag_basis(np.diag(g - a), k)
        return tau(sr_k(g, a, u), a) / tau(g, a)
    u = gaussian_block(d, k, rng)
    if kind is UpdateKind.SRK_RANDOMIZED:
        return tau(sr_k(g, a, u), a) / tau(g, a)
    if kind is UpdateKind.BFGS:
        return sigma(block_bfgs(g, a, u), a) / sigma(g, a)
    if kind is UpdateKind.DFP:
        return sigma(block_dfp(g, a, u), a) / sigma(g, a)
    # scaled directions L^T U with L^T L = G^{-1}
    c = cholesky(g).lower
    l = np.linalg.solve(c, np.eye(d))
    return sigma(block_bfgs(g, a, l.T @ u), a) / sigma(g, a)


def contraction_sweep(
    kind,
    d: int,
    k: int,
    kappa: float,
    n_trials: int,
    seed: int,
    eta: float = 4.0,
) -> ContractionReport:
    kind = UpdateKind(kind)
    if n_trials < 100:
        raise ValueError("n_trials must be at least 100")
    ratios = np.empty(n_trials)
    for i in range(n_trials):
        rng = spawn_rng(seed, d, k, i)
        a, g = random_pair(d, kappa, eta, rng)
        ratios[i] = one_trial(kind, a, g, k, rng)
    return ContractionReport(
        kind=kind,
        d=d,
        k=k,
        kappa=float(kappa),
        n_trials=n_trials,
        mean_ratio=float(np.mean(ratios)),
        max_ratio=float(np.max(ratios)),
        theory_bound=theory_bound(kind, d, k, kappa),
        slack=3.0 / np.sqrt(n_trials),
    )


@dataclass
class RateEstimate:
    ratios: np.ndarray
    factor: float
    superlinear: bool


def rate_estimate(lams: Sequence, floor: float = LAMBDA_FLOOR, window: int = 5) -> RateEstimate:
    """Per-step ratios ``lam[t+1] / lam[t]`` for ``lam[t]`` above ``floor``.

    Accepts raw values or records with a ``lam`` attribute. The superlinear
    flag asks for the last ``window`` ratios to be strictly decreasing.
    """
    vals = np.array([getattr(v, "lam", v) for v in lams], dtype=np.float64)
    keep = vals[:-1] > floor
    if keep.size == 0 or not keep[0]:
        raise InsufficientData("need at least two values with the first above the floor")
    # stop at the first value under the floor; later ratios are rounding noise
    stop = int(np.argmin(keep)) if not keep.all() else keep.size
    ratios = vals[1 : stop + 1] / vals[:stop]
    tail = ratios[-min(window, ratios.size) :]
    superlinear = bool(np.all(np.diff(tail) < 0))
    factor = float(np.exp(np.mean(np.log(np.maximum(tail, 1e-300)))))
    return RateEstimate(ratios=ratios, factor=factor, superlinear=superlinear)


def projector_mean(d: int, k: int, n_samples: int, seed: int) -> np.ndarray:
    """Monte-Carlo mean of ``U (U^T U)^{-1} U^T`` over Gaussian ``U``."""
    rng = spawn_rng(seed, d, k)
    acc = np.zeros((d, d))
    for _ in range(n_samples):
        q, _ = np.linalg.qr(gaussian_block(d, k, rng))
        acc += q @ q.T
    return acc / n_samples
