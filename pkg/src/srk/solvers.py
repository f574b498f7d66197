"""Block quasi-Newton iterations and an exact Newton reference.

All methods share the same skeleton: a full quasi-Newton step with the
current estimator, the step length ``r_t`` in the local norm, the
``(1 + M r_t)`` correction of the estimator, then a block update towards the
Hessian at the new point. They differ in how the directions are picked and
which update is applied.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import time
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.sparse.linalg as spla

from .errors import (
    ConfigError,
    Diverged,
    EstimatorBreakdown,
    NonConvergence,
    NonFinite,
    NotPositiveDefinite,
    SingularBlock,
)
from .matcore import SpdFactor, cholesky, loewner_bounds, solve_spd, spawn_rng
from .objectives import HESS_FULL_MAX_DIM, Objective
from .updates import (
    RESIDUAL_RTOL,
    Strategy,
    StrategyKind,
    block_bfgs_inverse_products,
    block_bfgs_products,
    block_dfp_products,
    correct_factor,
    orthonormal_basis,
    orthonormalize,
    pick_directions,
    sr_k_inverse_products,
    sr_k_products,
    update_l_products,
)

log = logging.getLogger(__name__)

FACTOR_DRIFT_TOL = 1e-3


class Method(str, enum.Enum):
    SRK = "srk"
    BLOCK_BFGS = "block_bfgs"
    BLOCK_DFP = "block_dfp"
    FASTER_BFGS = "faster_bfgs"
    NEWTON = "newton"


class InverseMode(str, enum.Enum):
    REFACTORIZE = "refactorize"
    WOODBURY = "woodbury"


@dataclass(frozen=True)
class SolverConfig:
    method: Method = Method.SRK
    strategy: StrategyKind = StrategyKind.GREEDY
    k: int = 1
    sc_m: float | None = None  # None: take the oracle's constant
    g0_scale: float | None = None  # None: G0 = L I
    max_iters: int = 100
    grad_tol: float = 1e-9
    lam_tol: float | None = None  # optional stop on the local gradient norm
    seed: int = 0
    inverse_mode: InverseMode = InverseMode.REFACTORIZE
    record_diagnostics: bool = False
    divergence_factor: float = 1e3

    def __post_init__(self):
        for name, enum_type in (("method", Method), ("strategy", StrategyKind), ("inverse_mode", InverseMode)):
            value = getattr(self, name)
            if not isinstance(value, enum_type):
                try:
                    object.__setattr__(self, name, enum_type(value))
                except ValueError as exc:
                    raise ConfigError(f"unknown {name} {value!r}") from exc

    def validate(self, d: int) -> None:
        if self.method is not Method.NEWTON and not 1 <= self.k <= d:
            raise ConfigError(f"block size k={self.k} outside [1, {d}]")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be at least 1")
        if self.sc_m is not None and self.sc_m < 0:
            raise ConfigError("sc_m must be nonnegative")
        if self.g0_scale is not None and not self.g0_scale > 0:
            raise ConfigError("g0_scale must be positive")
        if self.grad_tol < 0:
            raise ConfigError("grad_tol must be nonnegative")
        if self.lam_tol is not None and self.lam_tol < 0:
            raise ConfigError("lam_tol must be nonnegative")
        if self.strategy is StrategyKind.GREEDY and self.method in (
            Method.BLOCK_BFGS,
            Method.BLOCK_DFP,
            Method.FASTER_BFGS,
        ):
            raise ConfigError(f"{self.method.value} only supports the randomized strategy")
        if self.inverse_mode is InverseMode.WOODBURY and self.method in (Method.BLOCK_DFP, Method.NEWTON):
            raise ConfigError(f"woodbury inverse mode is not available for {self.method.value}")

    @property
    def label(self) -> str:
        if self.method is Method.NEWTON:
            return "newton"
        if self.method is Method.SRK:
            prefix = "G" if self.strategy is StrategyKind.GREEDY else "R"
            return f"{prefix}-SR-{self.k}"
        names = {Method.BLOCK_BFGS: "RB-BFGS", Method.BLOCK_DFP: "RB-DFP", Method.FASTER_BFGS: "FRB-BFGS"}
        return f"{names[self.method]}-{self.k}"


@dataclass
class IterationRecord:
    """State at iterate ``t`` and the step taken from it."""

    t: int
    lam: float
    grad_norm: float
    r_t: float
    step_norm: float
    elapsed_seconds: float = 0.0
    tau: float | None = None
    sigma: float | None = None
    eta: float | None = None
    stop_reason: str | None = None


@dataclass
class SolverState:
    x: np.ndarray
    g: np.ndarray
    t: int = 0
    factor: SpdFactor | None = None
    h_inv: np.ndarray | None = None
    l_factor: np.ndarray | None = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Apply ``G^{-1}`` with whichever representation is maintained."""
        if self.l_factor is not None:
            return self.l_factor.T @ (self.l_factor @ rhs)
        if self.h_inv is not None:
            return self.h_inv @ rhs
        if self.factor is None:
            self.factor = _factor(self.g, self.t)
        return solve_spd(self.factor, rhs)


def _factor(g: np.ndarray, t: int) -> SpdFactor:
    try:
        return cholesky(g)
    except NotPositiveDefinite as exc:
        raise EstimatorBreakdown("estimator lost positive definiteness", iteration=t) from exc


def _check_finite(what: str, arr, t: int) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"iteration {t}: {what} is not finite")


# --- measures -----------------------------------------------------------------


def lambda_metric(oracle: Objective, x, grad) -> float:
    """Local gradient norm ``sqrt(grad^T H^{-1} grad)``."""
    grad = np.asarray(grad, dtype=np.float64)
    if not np.any(grad):
        return 0.0
    if oracle.dim <= min(HESS_FULL_MAX_DIM, getattr(oracle, "hess_full_max_dim", HESS_FULL_MAX_DIM)):
        v = solve_spd(cholesky(oracle.hess_full(x)), grad)
    else:
        op = spla.LinearOperator((oracle.dim, oracle.dim), matvec=lambda z: oracle.hess_vec(x, z), dtype=np.float64)
        v, info = spla.cg(op, grad, rtol=1e-8, maxiter=10 * oracle.dim)
        if info != 0:
            raise NonConvergence(f"CG for the local gradient norm stopped with info={info}")
    return float(np.sqrt(max(grad @ v, 0.0)))


def weighted_step_norm(oracle: Objective, x_old, x_new) -> float:
    delta = np.asarray(x_new, dtype=np.float64) - np.asarray(x_old, dtype=np.float64)
    if not np.any(delta):
        return 0.0
    return float(np.sqrt(max(delta @ oracle.hess_vec(x_old, delta), 0.0)))


def _diagnostics(state: SolverState, oracle: Objective) -> dict:
    h = oracle.hess_full(state.x)
    fh = cholesky(h)
    lo, hi = loewner_bounds(state.g, h)
    return {
        "tau": float(np.trace(state.g - h)),
        "sigma": float(np.trace(solve_spd(fh, state.g - h))),
        "eta": hi,
        "eta_min": lo,
    }


def _record(state, oracle, config, grad, r_t=0.0, step_norm=0.0, stop_reason=None) -> IterationRecord:
    rec = IterationRecord(
        t=state.t,
        lam=lambda_metric(oracle, state.x, grad),
        grad_norm=float(np.linalg.norm(grad)),
        r_t=float(r_t),
        step_norm=float(step_norm),
        stop_reason=stop_reason,
    )
    if config.record_diagnostics and config.method is not Method.NEWTON:
        diag = _diagnostics(state, oracle)
        rec.tau, rec.sigma, rec.eta = diag["tau"], diag["sigma"], diag["eta"]
    return rec


# --- initialization ---------------------------------------------------------------


def init_state(oracle: Objective, config: SolverConfig, x0) -> SolverState:
    config.validate(oracle.dim)
    x0 = np.array(x0, dtype=np.float64)
    if x0.shape != (oracle.dim,):
        raise ConfigError(f"x0 must have shape ({oracle.dim},)")
    _check_finite("x0", x0, 0)
    d = oracle.dim
    scale = oracle.lip_l if config.g0_scale is None else float(config.g0_scale)
    state = SolverState(x=x0, g=scale * np.eye(d))
    if config.method is Method.FASTER_BFGS:
        state.l_factor = np.eye(d) / np.sqrt(scale)
    elif config.inverse_mode is InverseMode.WOODBURY:
        state.h_inv = np.eye(d) / scale
    return state


def _sc_m(oracle, config) -> float:
    return oracle.sc_m if config.sc_m is None else float(config.sc_m)


def _newton_part(state, oracle, config, grad):
    """Quasi-Newton step, local step length and the corrected estimator."""
    x_new = state.x - state.solve(grad)
    _check_finite("iterate", x_new, state.t)
    r = weighted_step_norm(oracle, state.x, x_new)
    scale = 1.0 + _sc_m(oracle, config) * r
    return x_new, r, scale


def _with_resample(config, t, draw, update):
    """Draw directions and update; on a singular block redraw once."""
    u = draw(spawn_rng(config.seed, t, 0))
    try:
        return update(u)
    except SingularBlock:
        log.debug("singular block at iteration %d, resampling", t)
        return update(draw(spawn_rng(config.seed, t, 1)))


def _finish(state, x_new, g_new, **kw) -> SolverState:
    new = SolverState(x=x_new, g=g_new, t=state.t + 1, **kw)
    if new.h_inv is None and new.l_factor is None:
        new.factor = _factor(g_new, new.t)
    return new


# --- steps -----------------------------------------------------------------------


def step_sr_k(state: SolverState, oracle: Objective, config: SolverConfig, grad=None):
    grad = oracle.gradient(state.x) if grad is None else grad
    x_new, r, scale = _newton_part(state, oracle, config, grad)
    g_tilde = scale * state.g
    h_tilde = None if state.h_inv is None else state.h_inv / scale
    hdiag = oracle.hess_diag(x_new)
    resid = np.diag(g_tilde) - hdiag
    d = oracle.dim
    strategy = Strategy(config.strategy, config.k)

    if np.sum(resid) <= RESIDUAL_RTOL * np.sum(hdiag):
        g_new, h_new = g_tilde, h_tilde
    else:

        def update(u):
            u = orthonormal_basis(u)
            v = g_tilde @ u - oracle.hess_mat(x_new, u)
            g_up = sr_k_products(g_tilde, v, u)
            h_up = None if h_tilde is None else sr_k_inverse_products(h_tilde, v, u)
            return g_up, h_up

        if config.strategy is StrategyKind.GREEDY:
            g_new, h_new = update(pick_directions(strategy, resid, d, None))
        else:
            g_new, h_new = _with_resample(
                config, state.t, lambda rng: pick_directions(strategy, None, d, rng), update
            )
    _check_finite("estimator", g_new, state.t)
    rec = _record(state, oracle, config, grad, r, np.linalg.norm(x_new - state.x))
    return _finish(state, x_new, g_new, h_inv=h_new), rec


def step_block_bfgs_dfp(state: SolverState, oracle: Objective, config: SolverConfig, grad=None):
    grad = oracle.gradient(state.x) if grad is None else grad
    x_new, r, scale = _newton_part(state, oracle, config, grad)
    g_tilde = scale * state.g
    h_tilde = None if state.h_inv is None else state.h_inv / scale
    d = oracle.dim
    strategy = Strategy(StrategyKind.RANDOMIZED, config.k)

    def update(u):
        u = orthonormal_basis(u)
        au = oracle.hess_mat(x_new, u)
        gu = g_tilde @ u
        if config.method is Method.BLOCK_DFP:
            return block_dfp_products(g_tilde, gu, au, u), None
        g_up = block_bfgs_products(g_tilde, gu, au, u)
        h_up = None if h_tilde is None else block_bfgs_inverse_products(h_tilde, au, u)
        return g_up, h_up

    g_new, h_new = _with_resample(config, state.t, lambda rng: pick_directions(strategy, None, d, rng), update)
    _check_finite("estimator", g_new, state.t)
    rec = _record(state, oracle, config, grad, r, np.linalg.norm(x_new - state.x))
    return _finish(state, x_new, g_new, h_inv=h_new), rec


def step_faster_bfgs(state: SolverState, oracle: Objective, config: SolverConfig, grad=None):
    if state.l_factor is None:
        raise ConfigError("faster block BFGS needs an inverse factor in the state")
    grad = oracle.gradient(state.x) if grad is None else grad
    x_new, r, scale = _newton_part(state, oracle, config, grad)
    m = _sc_m(oracle, config)
    g_tilde = scale * state.g
    l_tilde = correct_factor(state.l_factor, m, r)
    d = oracle.dim
    strategy = Strategy(StrategyKind.RANDOMIZED, config.k)

    def update(u):
        # re-base U so the scaled directions L~^T U are orthonormal, then
        # recompute them so that s and U stay exactly consistent
        _, u = orthonormalize(l_tilde.T @ u, u)
        s = l_tilde.T @ u
        a_s = oracle.hess_mat(x_new, s)
        g_up = block_bfgs_products(g_tilde, g_tilde @ s, a_s, s)
        l_up = update_l_products(l_tilde, a_s, u)
        return g_up, l_up

    g_new, l_new = _with_resample(config, state.t, lambda rng: pick_directions(strategy, None, d, rng), update)
    _check_finite("estimator", g_new, state.t)
    _check_finite("inverse factor", l_new, state.t)
    if config.record_diagnostics:
        drift = np.linalg.norm(l_new.T @ l_new @ g_new - np.eye(d), 2)
        if drift > FACTOR_DRIFT_TOL:
            log.warning("iteration %d: inverse factor drift %.2e, refactorizing", state.t, drift)
            l_new = refactor_inverse(g_new, state.t + 1)
    rec = _record(state, oracle, config, grad, r, np.linalg.norm(x_new - state.x))
    return _finish(state, x_new, g_new, l_factor=l_new), rec


def refactor_inverse(g: np.ndarray, t: int = 0) -> np.ndarray:
    """``L`` with ``L^T L = g^{-1}``: the inverse of the Cholesky factor."""
    c = _factor(g, t).lower
    return np.linalg.solve(c, np.eye(g.shape[0]))


def step_newton(state: SolverState, oracle: Objective, config: SolverConfig, grad=None):
    grad = oracle.gradient(state.x) if grad is None else grad
    h = oracle.hess_full(state.x)
    fac = _factor(h, state.t)
    x_new = state.x - solve_spd(fac, grad)
    _check_finite("iterate", x_new, state.t)
    r = weighted_step_norm(oracle, state.x, x_new)
    rec = _record(SolverState(state.x, h, state.t), oracle, config, grad, r, np.linalg.norm(x_new - state.x))
    return SolverState(x=x_new, g=h, t=state.t + 1, factor=fac), rec


STEPS = {
    Method.SRK: step_sr_k,
    Method.BLOCK_BFGS: step_block_bfgs_dfp,
    Method.BLOCK_DFP: step_block_bfgs_dfp,
    Method.FASTER_BFGS: step_faster_bfgs,
    Method.NEWTON: step_newton,
}


def step(state, oracle, config, grad=None):
    return STEPS[config.method](state, oracle, config, grad)


# --- drivers ---------------------------------------------------------------------


def iterate(oracle: Objective, config: SolverConfig, x0) -> Iterator[tuple[SolverState, IterationRecord]]:
    """Yield ``(state_t, record_t)`` until a tolerance is met or ``max_iters`` is reached.

    The last record carries ``stop_reason``.
    """
    state = init_state(oracle, config, x0)
    start = time.perf_counter()
    lam0 = None
    while True:
        grad = oracle.gradient(state.x)
        _check_finite("gradient", grad, state.t)
        gnorm = float(np.linalg.norm(grad))
        stop = None
        if gnorm <= config.grad_tol:
            stop = "grad_tol"
        elif config.lam_tol is not None and lambda_metric(oracle, state.x, grad) <= config.lam_tol:
            stop = "lam_tol"
        elif state.t >= config.max_iters:
            stop = "max_iters"
        if stop is not None:
            rec = _record(state, oracle, config, grad, stop_reason=stop)
        else:
            new_state, rec = step(state, oracle, config, grad)
        rec.elapsed_seconds = time.perf_counter() - start
        if lam0 is None:
            lam0 = rec.lam
        elif rec.lam > config.divergence_factor * lam0:
            raise Diverged(f"iteration {rec.t}: local gradient norm {rec.lam:.3e} exceeds {config.divergence_factor:g} x initial")
        yield state, rec
        if stop is not None:
            return
        state = new_state


def run(oracle: Objective, config: SolverConfig, x0) -> list[IterationRecord]:
    return [rec for _, rec in iterate(oracle, config, x0)]


def final_point(oracle: Objective, config: SolverConfig, x0) -> tuple[np.ndarray, list[IterationRecord]]:
    records, state = [], None
    for state, rec in iterate(oracle, config, x0):
        records.append(rec)
    return state.x, records


def gradient_descent(oracle: Objective, x0, steps: int, step_size: float | None = None) -> np.ndarray:
    """Plain gradient steps with ``1/L`` step size, used to warm-start."""
    x = np.array(x0, dtype=np.float64)
    eta = 1.0 / oracle.lip_l if step_size is None else step_size
    for _ in range(steps):
        x = x - eta * oracle.gradient(x)
    return x


def with_overrides(config: SolverConfig, **kw) -> SolverConfig:
    return dataclasses.replace(config, **kw)
