"""Hessian-estimator updates: SR-k, block BFGS, block DFP and the factor update.

Each update comes in two flavours. The dense form ``op(g, a, u)`` takes the
target matrix ``a`` explicitly. The ``*_products`` form takes only the block
products with the target (``a @ u`` and friends), which is what the solvers
get from Hessian-vector products without forming the Hessian.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, MissingResidualDiag, SingularBlock
from .matcore import (
    as_block,
    as_sym,
    cholesky,
    gaussian_block,
    inv_sqrt_spd,
    pinv_small,
    solve_spd,
    symmetrize,
    top_k_diag_basis,
)

BLOCK_COND_MAX = 1e12
RESIDUAL_RTOL = 1e-12


def _check_pair(g, a):
    g = as_sym(g, "g")
    a = as_sym(a, "a")
    if g.shape != a.shape:
        raise DimensionMismatch(f"g has shape {g.shape}, a has shape {a.shape}")
    return g, a


def _block_solver(c: np.ndarray, what: str):
    """Cholesky of a small SPD block, refusing ill-conditioned ones."""
    c = symmetrize(c)
    w = np.linalg.eigvalsh(c)
    if not np.all(np.isfinite(w)) or w[0] <= 0.0 or w[-1] > BLOCK_COND_MAX * w[0]:
        raise SingularBlock(f"{what} is numerically singular (eigenvalues in [{w[0]:.3e}, {w[-1]:.3e}])")
    return cholesky(c)


def _qr_if_well_posed(u):
    q, r = np.linalg.qr(u)
    diag = np.abs(np.diag(r))
    if diag.min() ** 2 <= diag.max() ** 2 / BLOCK_COND_MAX:
        return None, None
    return q, r


def orthonormal_basis(u) -> np.ndarray:
    """Orthonormal basis of ``range(U)``, or ``U`` itself when it is nearly rank deficient.

    Every update here depends on ``U`` only through its range. Computing the
    target products on the orthonormal basis keeps them free of the
    conditioning of ``U``. Blocks whose Gram matrix ``U^T U`` has condition
    beyond ``BLOCK_COND_MAX`` are returned untouched so that degenerate
    directions still surface as :class:`SingularBlock`.
    """
    q, _ = _qr_if_well_posed(u)
    return u if q is None else q


def orthonormalize(u, *prods):
    """Swap ``U`` for ``Q = U R^{-1}`` and each product ``X U`` for ``X Q``."""
    q, r = _qr_if_well_posed(u)
    if q is None:
        return (u, *prods)
    return (q, *(solve_triangular(r, p.T, trans="T").T for p in prods))


# --- SR-k -------------------------------------------------------------------


def sr_k_products(g, v, u) -> np.ndarray:
    """SR-k update given ``v = (G - A) U``.

    Returns ``G - V (U^T V)^+ V^T``.
    """
    g = as_sym(g, "g")
    u = as_block(u, g.shape[0])
    v = np.asarray(v, dtype=np.float64).reshape(u.shape)
    u, v = orthonormalize(u, v)
    s = pinv_small(u.T @ v)
    return symmetrize(g - v @ s @ v.T)


def sr_k(g, a, u) -> np.ndarray:
    g, a = _check_pair(g, a)
    u = orthonormal_basis(as_block(u, g.shape[0]))
    r = g - a
    if np.trace(r) <= RESIDUAL_RTOL * abs(np.trace(a)):
        return g
    return sr_k_products(g, r @ u, u)


def sr_k_inverse_products(h, v, u) -> np.ndarray:
    """Inverse of :func:`sr_k_products` output given ``h = G^{-1}``.

    Woodbury on the retained eigen-directions of ``U^T V``.
    """
    h = as_sym(h, "h")
    u = as_block(u, h.shape[0])
    v = np.asarray(v, dtype=np.float64).reshape(u.shape)
    u, v = orthonormalize(u, v)
    w, q = np.linalg.eigh(symmetrize(u.T @ v))
    wmax = np.max(np.abs(w))
    if wmax == 0.0:
        return h
    keep = np.abs(w) > 1e-12 * wmax
    vq = v @ q[:, keep]
    hv = h @ vq
    core = np.diag(w[keep]) - vq.T @ hv
    try:
        mid = np.linalg.solve(symmetrize(core), hv.T)
    except np.linalg.LinAlgError as exc:
        raise SingularBlock("SR-k Woodbury core is singular") from exc
    return symmetrize(h + hv @ mid)


# --- block BFGS / DFP ---------------------------------------------------------


def block_bfgs_products(g, gu, au, u) -> np.ndarray:
    """``G - GU (U^T G U)^{-1} U^T G + AU (U^T A U)^{-1} U^T A``."""
    g = as_sym(g, "g")
    u, gu, au = orthonormalize(as_block(u, g.shape[0]), gu, au)
    fg = _block_solver(u.T @ gu, "U^T G U")
    fa = _block_solver(u.T @ au, "U^T A U")
    return symmetrize(g - gu @ solve_spd(fg, gu.T) + au @ solve_spd(fa, au.T))


def block_bfgs(g, a, u) -> np.ndarray:
    g, a = _check_pair(g, a)
    u = orthonormal_basis(as_block(u, g.shape[0]))
    return block_bfgs_products(g, g @ u, a @ u, u)


def block_bfgs_inverse_products(h, au, u) -> np.ndarray:
    """Inverse of the block BFGS update given ``h = G^{-1}`` and ``A U``."""
    h = as_sym(h, "h")
    u, au = orthonormalize(as_block(u, h.shape[0]), au)
    fa = _block_solver(u.T @ au, "U^T A U")
    # H+ = U C^{-1} U^T + P H P^T  with  P = I - U C^{-1} (AU)^T
    hw = h @ au
    cwh = solve_spd(fa, hw.T)
    ucu = u @ solve_spd(fa, u.T)
    mid = solve_spd(fa, solve_spd(fa, au.T @ hw).T)
    php = h - u @ cwh - cwh.T @ u.T + u @ mid @ u.T
    return symmetrize(ucu + php)


def block_bfgs_inverse(h, a, u) -> np.ndarray:
    h, a = _check_pair(h, a)
    u = orthonormal_basis(as_block(u, h.shape[0]))
    return block_bfgs_inverse_products(h, a @ u, u)


def block_dfp_products(g, gu, au, u) -> np.ndarray:
    """``AU C^{-1} U^T A + (I - AU C^{-1} U^T) G (I - U C^{-1} U^T A)``, ``C = U^T A U``.

    Evaluated as ``G - B Z^T - Z B^T + B (U^T Z) B^T`` with ``B = AU C^{-1}`` and
    ``Z = (G - A) U``, which only touches the residual and so loses less to
    cancellation than expanding the projector products.
    """
    g = as_sym(g, "g")
    u, gu, au = orthonormalize(as_block(u, g.shape[0]), gu, au)
    fa = _block_solver(u.T @ au, "U^T A U")
    b = solve_spd(fa, au.T).T
    z = gu - au
    bz = b @ z.T
    return symmetrize(g - bz - bz.T + b @ (u.T @ z) @ b.T)


def block_dfp(g, a, u) -> np.ndarray:
    g, a = _check_pair(g, a)
    u = orthonormal_basis(as_block(u, g.shape[0]))
    return block_dfp_products(g, g @ u, a @ u, u)


# --- inverse factor -----------------------------------------------------------


def update_l_products(l, alu, u) -> np.ndarray:
    """Factor update given ``alu = A L^T U``.

    With ``L^T L = G^{-1}`` the result ``L+`` satisfies ``L+^T L+ = G+^{-1}``
    where ``G+ = block_bfgs(G, A, L^T U)``.
    """
    l = np.asarray(l, dtype=np.float64)
    d = l.shape[0]
    u, alu = orthonormalize(as_block(u, d), np.asarray(alu, dtype=np.float64))
    lalu = l @ alu
    c = symmetrize(u.T @ lalu)
    _block_solver(c, "U^T L A L^T U")
    c_isqrt = inv_sqrt_spd(c)
    left = u @ inv_sqrt_spd(u.T @ u) - lalu @ c_isqrt
    return l + left @ (c_isqrt @ (u.T @ l))


def update_l(l, a, u) -> np.ndarray:
    l = np.asarray(l, dtype=np.float64)
    a = as_sym(a, "a")
    if l.shape != a.shape:
        raise DimensionMismatch(f"l has shape {l.shape}, a has shape {a.shape}")
    u = orthonormal_basis(as_block(u, a.shape[0]))
    return update_l_products(l, a @ (l.T @ u), u)


# --- correction and directions ------------------------------------------------


def correct(g, m_const: float, r: float) -> np.ndarray:
    return (1.0 + m_const * r) * np.asarray(g, dtype=np.float64)


def correct_factor(l, m_const: float, r: float) -> np.ndarray:
    return np.asarray(l, dtype=np.float64) / np.sqrt(1.0 + m_const * r)


class StrategyKind(str, enum.Enum):
    RANDOMIZED = "randomized"
    GREEDY = "greedy"


@dataclass(frozen=True)
class Strategy:
    kind: StrategyKind
    k: int


def pick_directions(strategy: Strategy, residual_diag, d: int, rng: np.random.Generator | None) -> np.ndarray:
    if strategy.kind is StrategyKind.RANDOMIZED:
        if rng is None:
            raise ValueError("randomized strategy needs a generator")
        return gaussian_block(d, strategy.k, rng)
    if residual_diag is None:
        raise MissingResidualDiag("greedy strategy needs diag(G~ - A)")
    residual_diag = np.asarray(residual_diag, dtype=np.float64)
    if residual_diag.shape != (d,):
        raise DimensionMismatch(f"residual diagonal must have shape ({d},)")
    if np.max(residual_diag) <= 0.0:
        # only reachable through rounding since G~ >= A
        return top_k_diag_basis(np.zeros(d), strategy.k)
    return top_k_diag_basis(residual_diag, strategy.k)


# --- progress measures ---------------------------------------------------------


def tau(g, a) -> float:
    g, a = _check_pair(g, a)
    return float(np.trace(g - a))


def sigma(g, a) -> float:
    g, a = _check_pair(g, a)
    fa = cholesky(a)
    return float(np.trace(solve_spd(fa, g - a)))
