"""Dense symmetric linear-algebra kernels.

Matrices are plain ``numpy`` arrays. A symmetric matrix is a square float
array; a direction block is a ``(d, k)`` array with ``k <= d``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite

PINV_RTOL = 1e-12


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def as_sym(m, name: str = "matrix") -> np.ndarray:
    """Validate a square matrix and return its symmetric part as float64."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be square with dim >= 1, got shape {m.shape}")
    return symmetrize(m)


def as_block(u, d: int) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[0] != d:
        raise DimensionMismatch(f"direction block must have {d} rows, got shape {u.shape}")
    if not 1 <= u.shape[1] <= d:
        raise DimensionMismatch(f"block width must be in [1, {d}], got {u.shape[1]}")
    return u


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor ``lower @ lower.T`` of an SPD matrix."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def matrix(self) -> np.ndarray:
        return self.lower @ self.lower.T


def cholesky(m, pivot_tol: float = 0.0) -> SpdFactor:
    m = as_sym(m)
    try:
        lower = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Cholesky factorization failed: matrix is not positive definite") from exc
    piv = np.diag(lower)
    if not np.all(np.isfinite(lower)) or np.min(piv) <= pivot_tol:
        raise NotPositiveDefinite(f"Cholesky pivot {np.min(piv):.3e} <= {pivot_tol:.3e}")
    return SpdFactor(lower)


def solve_spd(f: SpdFactor, rhs) -> np.ndarray:
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape[0] != f.dim:
        raise DimensionMismatch(f"rhs has {rhs.shape[0]} rows, factor has dim {f.dim}")
    return scipy.linalg.cho_solve((f.lower, True), rhs, check_finite=False)


def inverse_spd(f: SpdFactor) -> np.ndarray:
    return symmetrize(solve_spd(f, np.eye(f.dim)))


def pinv_small(m, tol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric matrix.

    Eigenvalues with ``|w| <= tol * max|w|`` are treated as zero.
    """
    m = as_sym(m)
    w, q = np.linalg.eigh(m)
    wmax = np.max(np.abs(w))
    if wmax == 0.0:
        return np.zeros_like(m)
    keep = np.abs(w) > tol * wmax
    q = q[:, keep]
    return symmetrize((q / w[keep]) @ q.T)


def inv_sqrt_spd(m) -> np.ndarray:
    """Symmetric inverse square root of a small SPD matrix."""
    w, q = np.linalg.eigh(as_sym(m))
    if w[0] <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} is not positive")
    return symmetrize((q / np.sqrt(w)) @ q.T)


def loewner_bounds(g, h) -> tuple[float, float]:
    """Extreme generalized eigenvalues of the pencil ``(g, h)``.

    ``h <= g`` in Loewner order iff the first value is at least 1.
    """
    g = as_sym(g, "g")
    h = as_sym(h, "h")
    if g.shape != h.shape:
        raise DimensionMismatch(f"shapes differ: {g.shape} vs {h.shape}")
    c = cholesky(h).lower
    # h^{-1/2} g h^{-T/2} has the same spectrum as h^{-1} g
    tmp = scipy.linalg.solve_triangular(c, g, lower=True)
    s = scipy.linalg.solve_triangular(c, tmp.T, lower=True)
    w = np.linalg.eigvalsh(symmetrize(s))
    return float(w[0]), float(w[-1])


def spawn_rng(seed: int, *counters: int) -> np.random.Generator:
    """Independent generator for the stream keyed by ``(seed, *counters)``."""
    return np.random.default_rng(np.random.SeedSequence([seed, *counters]))


def gaussian_block(d: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if not 1 <= k <= d:
        raise DimensionMismatch(f"need 1 <= k <= d, got k={k}, d={d}")
    return rng.standard_normal((d, k))


def top_k_diag_basis(diag, k: int) -> np.ndarray:
    """Standard basis columns at the ``k`` largest entries of ``diag``.

    ``diag`` may be a vector or a square matrix (its diagonal is used).
    Ties go to the lowest index.
    """
    diag = np.asarray(diag, dtype=np.float64)
    if diag.ndim == 2:
        diag = np.diag(diag)
    d = diag.shape[0]
    if not 1 <= k <= d:
        raise DimensionMismatch(f"need 1 <= k <= d, got k={k}, d={d}")
    idx = np.argsort(-diag, kind="stable")[:k]
    u = np.zeros((d, k))
    u[idx, np.arange(k)] = 1.0
    return u


def projector(u: np.ndarray) -> np.ndarray:
    """Orthogonal projector ``U (U^T U)^{-1} U^T`` onto the range of ``u``."""
    q, _ = np.linalg.qr(u)
    return q @ q.T
