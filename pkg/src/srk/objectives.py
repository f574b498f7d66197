"""Objective oracles: regularized logistic regression and quadratics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NotPositiveDefinite
from .matcore import as_sym

HESS_FULL_MAX_DIM = 2000


def sigmoid(z):
    """Logistic function, evaluated without overflow for either sign."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z):
    """``log(1 + exp(z))`` without overflow."""
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


class Objective:
    """Oracle interface the solvers rely on.

    Subclasses provide ``value``, ``gradient``, ``hess_mat``, ``hess_diag``
    and ``hess_full`` plus the constants ``mu``, ``lip_l`` and ``sc_m``.
    """

    dim: int
    mu: float
    lip_l: float
    sc_m: float = 0.0

    @property
    def kappa(self) -> float:
        return self.lip_l / self.mu if self.mu > 0 else math.inf

    def _vec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"expected vector of shape ({self.dim},), got {x.shape}")
        return x

    def _block(self, v) -> tuple[np.ndarray, bool]:
        v = np.asarray(v, dtype=np.float64)
        vector = v.ndim == 1
        if vector:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] != self.dim:
            raise DimensionMismatch(f"expected block with {self.dim} rows, got shape {v.shape}")
        return v, vector

    def hess_vec(self, x, v) -> np.ndarray:
        return self.hess_mat(x, np.asarray(v, dtype=np.float64)[:, None])[:, 0]


@dataclass
class LogisticProblem(Objective):
    """``(1/n) sum log(1 + exp(-b_i a_i^T x)) + (gamma/2) ||x||^2``.

    ``features`` is stored as CSR; dense input is converted.
    """

    features: sp.csr_matrix
    labels: np.ndarray
    reg_gamma: float
    sc_m: float = 1.0
    hess_full_max_dim: int = HESS_FULL_MAX_DIM
    mu: float = field(init=False)
    lip_l: float = field(init=False)

    def __post_init__(self):
        self.features = sp.csr_matrix(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64).ravel()
        n = self.features.shape[0]
        if self.labels.shape != (n,):
            raise DimensionMismatch(f"{n} feature rows but {self.labels.size} labels")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        # gamma = 0 is accepted for oracle evaluation; the solvers' guarantees need gamma > 0
        if not self.reg_gamma >= 0:
            raise ValueError("reg_gamma must be nonnegative")
        if self.sc_m < 0:
            raise ValueError("sc_m must be nonnegative")
        self.dim = self.features.shape[1]
        self.mu, self.lip_l = logistic_constants(self)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    def _margins(self, x):
        return self.labels * (self.features @ x)

    def _curvature(self, x):
        s = sigmoid(self._margins(x))
        return s * (1.0 - s)

    def value(self, x) -> float:
        x = self._vec(x)
        loss = np.mean(softplus(-self._margins(x))) if self.n else 0.0
        return float(loss + 0.5 * self.reg_gamma * (x @ x))

    def gradient(self, x) -> np.ndarray:
        x = self._vec(x)
        g = self.reg_gamma * x
        if self.n:
            coef = -self.labels * sigmoid(-self._margins(x))
            g = g + (self.features.T @ coef) / self.n
        return g

    def hess_mat(self, x, v) -> np.ndarray:
        x = self._vec(x)
        v, vector = self._block(v)
        out = self.reg_gamma * v
        if self.n:
            w = self._curvature(x)
            av = self.features @ v
            out = out + (self.features.T @ (w[:, None] * av)) / self.n
        return out[:, 0] if vector else out

    def hess_diag(self, x) -> np.ndarray:
        x = self._vec(x)
        out = np.full(self.dim, self.reg_gamma)
        if self.n:
            w = self._curvature(x)
            sq = self.features.multiply(self.features)
            out = out + np.asarray(sq.T @ w).ravel() / self.n
        return out

    def hess_full(self, x) -> np.ndarray:
        if self.dim > self.hess_full_max_dim:
            raise MemoryError(f"hess_full disabled for d={self.dim} > {self.hess_full_max_dim}")
        x = self._vec(x)
        h = self.reg_gamma * np.eye(self.dim)
        if self.n:
            w = self._curvature(x)
            aw = sp.diags(w) @ self.features
            h = h + np.asarray((self.features.T @ aw).todense()) / self.n
        return 0.5 * (h + h.T)


def power_iteration(matvec, dim: int, rtol: float = 1e-6, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of a PSD operator given as ``matvec``."""
    # deterministic start with no zero components
    v = np.linspace(1.0, 2.0, dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(new - est) <= rtol * abs(new):
            return new
        est = new
    return est


def logistic_constants(p: LogisticProblem) -> tuple[float, float]:
    """``(mu, L)`` with ``L = lambda_max(A^T A / 4n) + gamma``."""
    gamma = float(p.reg_gamma)
    n, d = p.features.shape
    if n == 0 or p.features.nnz == 0:
        return gamma, gamma
    a = p.features
    top = power_iteration(lambda v: a.T @ (a @ v) / (4.0 * n), d)
    return gamma, top + gamma


@dataclass
class QuadraticProblem(Objective):
    """``0.5 x^T H x - b^T x`` with SPD ``h``; exact Hessian, ``M = 0``."""

    h: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.h = as_sym(self.h, "h")
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        if self.b.shape != (self.h.shape[0],):
            raise DimensionMismatch("b does not match h")
        w = np.linalg.eigvalsh(self.h)
        if w[0] <= 0:
            raise NotPositiveDefinite("quadratic Hessian must be positive definite")
        self.dim = self.h.shape[0]
        self.mu, self.lip_l = float(w[0]), float(w[-1])
        self.sc_m = 0.0

    def value(self, x) -> float:
        x = self._vec(x)
        return float(0.5 * x @ self.h @ x - self.b @ x)

    def gradient(self, x) -> np.ndarray:
        return self.h @ self._vec(x) - self.b

    def hess_mat(self, x, v) -> np.ndarray:
        self._vec(x)
        v, vector = self._block(v)
        out = self.h @ v
        return out[:, 0] if vector else out

    def hess_diag(self, x) -> np.ndarray:
        self._vec(x)
        return np.diag(self.h).copy()

    def hess_full(self, x) -> np.ndarray:
        self._vec(x)
        return self.h.copy()

    def minimizer(self) -> np.ndarray:
        return np.linalg.solve(self.h, self.b)


def random_quadratic(d: int, kappa: float, seed: int) -> QuadraticProblem:
    """Quadratic with log-spaced spectrum in ``[1, kappa]`` and a random rotation."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    lam = np.geomspace(1.0, kappa, d)
    return QuadraticProblem((q * lam) @ q.T, rng.standard_normal(d))
