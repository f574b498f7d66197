import logging

import numpy as np
import pytest

from srk.data import synth_logistic
from srk.errors import ConfigError, Diverged, EstimatorBreakdown, NonFinite, SingularBlock
from srk.objectives import QuadraticProblem, random_quadratic
from srk.solvers import (
    InverseMode,
    Method,
    SolverConfig,
    SolverState,
    _with_resample,
    final_point,
    gradient_descent,
    init_state,
    iterate,
    lambda_metric,
    run,
    step,
    weighted_step_norm,
    with_overrides,
)

QUASI = [
    SolverConfig(method="srk", strategy="greedy"),
    SolverConfig(method="srk", strategy="randomized"),
    SolverConfig(method="block_bfgs", strategy="randomized"),
    SolverConfig(method="block_dfp", strategy="randomized"),
    SolverConfig(method="faster_bfgs", strategy="randomized"),
]


def states(oracle, config, x0):
    return list(iterate(oracle, config, x0))


@pytest.fixture(scope="module")
def diag_quad():
    return QuadraticProblem(np.diag([1.0, 4.0]), np.zeros(2))


@pytest.fixture(scope="module")
def logistic():
    return synth_logistic(200, 20, seed=1, gamma=0.01)


class TestMeasures:
    def test_lambda_zero_gradient(self, diag_quad):
        assert lambda_metric(diag_quad, np.ones(2), np.zeros(2)) == 0.0

    def test_lambda_closed_form(self, diag_quad):
        x = np.ones(2)
        assert lambda_metric(diag_quad, x, diag_quad.gradient(x)) == pytest.approx(np.sqrt(5.0), rel=1e-14)

    def test_lambda_bounds(self, logistic):
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.standard_normal(20)
            g = logistic.gradient(x)
            lam = lambda_metric(logistic, x, g)
            gn = np.linalg.norm(g)
            assert gn / np.sqrt(logistic.lip_l) * (1 - 1e-6) <= lam <= gn / np.sqrt(logistic.mu) * (1 + 1e-9)

    def test_lambda_cg_path_matches_dense(self, logistic):
        x = np.random.default_rng(1).standard_normal(20)
        g = logistic.gradient(x)
        dense = lambda_metric(logistic, x, g)
        logistic.hess_full_max_dim = 5
        try:
            cg = lambda_metric(logistic, x, g)
        finally:
            logistic.hess_full_max_dim = 2000
        assert cg == pytest.approx(dense, rel=1e-7)

    def test_step_norm(self, diag_quad):
        x = np.array([0.3, -1.0])
        assert weighted_step_norm(diag_quad, x, x) == 0.0
        assert weighted_step_norm(diag_quad, x, x + [1.0, 0.0]) == pytest.approx(1.0)
        assert weighted_step_norm(diag_quad, x, x + [0.0, 1.0]) == pytest.approx(2.0)

    def test_step_norm_below_lambda(self, logistic):
        # G stays above the Hessian, so each quasi-Newton step is shorter than lambda
        x0 = np.full(20, 0.5)
        for cfg in QUASI:
            recs = run(logistic, with_overrides(cfg, k=3, max_iters=15), x0)
            assert all(r.r_t <= r.lam * (1 + 1e-10) for r in recs)


class TestConfig:
    @pytest.mark.parametrize("k", [0, 4])
    def test_block_size_rejected(self, diag_quad, k):
        with pytest.raises(ConfigError):
            run(diag_quad, SolverConfig(k=k), np.ones(2))

    def test_unknown_method(self):
        with pytest.raises(ConfigError):
            SolverConfig(method="lbfgs")

    @pytest.mark.parametrize("method", ["block_bfgs", "block_dfp", "faster_bfgs"])
    def test_greedy_only_for_srk(self, diag_quad, method):
        with pytest.raises(ConfigError):
            SolverConfig(method=method, strategy="greedy").validate(2)

    def test_woodbury_not_for_dfp(self):
        with pytest.raises(ConfigError):
            SolverConfig(method="block_dfp", strategy="randomized", inverse_mode="woodbury").validate(2)

    def test_other_checks(self):
        for kw in ({"max_iters": 0}, {"sc_m": -1.0}, {"g0_scale": 0.0}, {"grad_tol": -1.0}):
            with pytest.raises(ConfigError):
                SolverConfig(**kw).validate(3)

    def test_labels(self):
        assert [c.label for c in QUASI] == ["G-SR-1", "R-SR-1", "RB-BFGS-1", "RB-DFP-1", "FRB-BFGS-1"]
        assert SolverConfig(method="newton").label == "newton"

    def test_x0_shape(self, diag_quad):
        with pytest.raises(ConfigError):
            init_state(diag_quad, SolverConfig(), np.ones(3))


class TestFullBlock:
    @pytest.mark.parametrize("cfg", QUASI, ids=lambda c: c.method.value + "-" + c.strategy.value)
    def test_recovers_hessian_then_newton(self, cfg):
        q = random_quadratic(8, 100.0, seed=3)
        seq = states(q, with_overrides(cfg, k=8, grad_tol=1e-12), np.ones(8))
        np.testing.assert_allclose(seq[1][0].g, q.h, atol=1e-9 * q.lip_l)
        np.testing.assert_allclose(seq[2][0].x, q.minimizer(), atol=1e-10)

    def test_newton_one_iteration(self):
        q = random_quadratic(6, 100.0, seed=1)
        recs = run(q, SolverConfig(method="newton"), np.zeros(6))
        assert len(recs) == 2
        assert recs[-1].stop_reason == "grad_tol"


class TestSrkSolver:
    def test_greedy_trace_recursion(self):
        h = np.diag([1.0, 2.0, 5.0, 7.0, 3.0])
        q = QuadraticProblem(h, np.ones(5))
        lip = q.lip_l
        resid = lip - np.diag(h)
        seq = states(q, SolverConfig(k=1, max_iters=6, grad_tol=0.0), np.zeros(5))
        for t, (state, _) in enumerate(seq):
            tau_t = np.trace(state.g - h)
            assert tau_t == pytest.approx(resid.sum(), abs=1e-12)
            assert tau_t <= (1 - 1 / 5) ** t * (lip * 5 - np.trace(h)) + 1e-12
            resid[np.argmax(resid)] = 0.0

    def test_stationary_point(self, diag_quad):
        state = init_state(diag_quad, SolverConfig(k=1), np.zeros(2))
        new, rec = step(state, diag_quad, SolverConfig(k=1))
        np.testing.assert_array_equal(new.x, state.x)
        assert rec.r_t == 0.0

    def test_stationary_keeps_estimator_without_correction(self, logistic):
        cfg = SolverConfig(k=2)
        x_star, _ = final_point(logistic, with_overrides(cfg, grad_tol=1e-13), np.zeros(20))
        state = init_state(logistic, cfg, x_star)
        new, rec = step(state, logistic, cfg, grad=np.zeros(20))
        assert rec.r_t == 0.0
        np.testing.assert_array_equal(new.x, x_star)

    def test_synthetic_logistic_k10(self):
        p = synth_logistic(500, 50, seed=0, gamma=0.01)
        recs = run(p, SolverConfig(k=10, max_iters=60), np.zeros(50))
        assert recs[-1].stop_reason == "grad_tol"
        assert recs[-1].grad_norm <= 1e-9
        assert recs[-1].t <= 60

    @pytest.mark.parametrize("method", ["srk", "block_bfgs"])
    def test_woodbury_matches_refactorize(self, logistic, method):
        base = SolverConfig(method=method, strategy="randomized", k=4, max_iters=12, seed=5)
        a = run(logistic, base, np.zeros(20))
        b = run(logistic, with_overrides(base, inverse_mode="woodbury"), np.zeros(20))
        assert len(a) == len(b)
        np.testing.assert_allclose([r.grad_norm for r in a], [r.grad_norm for r in b], rtol=1e-5, atol=1e-14)

    def test_diagnostics_recorded(self, logistic):
        recs = run(logistic, SolverConfig(k=2, max_iters=5, record_diagnostics=True), np.zeros(20))
        assert all(r.tau is not None and r.sigma is not None and r.eta >= 1 - 1e-8 for r in recs)
        assert run(logistic, SolverConfig(k=2, max_iters=2), np.zeros(20))[0].tau is None

    def test_deterministic(self, logistic):
        cfg = SolverConfig(strategy="randomized", k=3, seed=11, max_iters=10)
        a = [r.lam for r in run(logistic, cfg, np.zeros(20))]
        b = [r.lam for r in run(logistic, cfg, np.zeros(20))]
        assert a == b


class TestBlockSolvers:
    def test_sigma_mean_contraction_on_trajectory(self):
        # quadratic with M = 0: the Hessian is fixed, so sigma ratios follow the update theory
        q = random_quadratic(12, 10.0, seed=2)
        k, ratios = 3, []
        for seed in range(200):
            cfg = SolverConfig(method="block_bfgs", strategy="randomized", k=k, seed=seed, max_iters=3,
                               grad_tol=0.0, record_diagnostics=True)
            recs = run(q, cfg, np.ones(12))
            ratios.append(recs[2].sigma / recs[1].sigma)
        assert np.mean(ratios) <= 1 - k / (12 * 10.0) + 3 / np.sqrt(200)

    def test_faster_factor_invariant(self):
        p = synth_logistic(300, 30, seed=2, gamma=0.01)
        cfg = SolverConfig(method="faster_bfgs", strategy="randomized", k=3, max_iters=20, grad_tol=0.0)
        worst = 0.0
        for state, _ in iterate(p, cfg, np.zeros(30)):
            h = np.linalg.inv(state.g)
            worst = max(worst, np.linalg.norm(state.l_factor.T @ state.l_factor - h) / np.linalg.norm(h))
        assert worst <= 1e-5

    def test_faster_drift_refactorizes(self, logistic, caplog, monkeypatch):
        import srk.solvers as solvers

        monkeypatch.setattr(solvers, "FACTOR_DRIFT_TOL", -1.0)
        cfg = SolverConfig(method="faster_bfgs", strategy="randomized", k=2, max_iters=3, record_diagnostics=True)
        with caplog.at_level(logging.WARNING, logger="srk.solvers"):
            seq = states(logistic, cfg, np.zeros(20))
        assert "refactorizing" in caplog.text
        last = seq[-1][0]
        np.testing.assert_allclose(last.l_factor.T @ last.l_factor @ last.g, np.eye(20), atol=1e-8)

    def test_fixed_point_at_zero_gradient(self, diag_quad):
        cfg = SolverConfig(method="block_dfp", strategy="randomized", k=1)
        state = init_state(diag_quad, cfg, np.zeros(2))
        new, rec = step(state, diag_quad, cfg)
        np.testing.assert_array_equal(new.x, np.zeros(2))
        assert rec.r_t == 0.0


class TestFailures:
    def test_resample_once(self):
        calls = []

        def update(u):
            calls.append(u)
            if len(calls) == 1:
                raise SingularBlock("degenerate")
            return "ok"

        cfg = SolverConfig(seed=3)
        assert _with_resample(cfg, 0, lambda rng: rng.standard_normal(2), update) == "ok"
        assert len(calls) == 2 and not np.array_equal(calls[0], calls[1])

    def test_resample_gives_up(self):
        def update(u):
            raise SingularBlock("degenerate")

        with pytest.raises(SingularBlock):
            _with_resample(SolverConfig(), 0, lambda rng: rng.standard_normal(2), update)

    def test_breakdown(self, diag_quad):
        state = SolverState(x=np.ones(2), g=np.diag([1.0, -1.0]))
        with pytest.raises(EstimatorBreakdown) as err:
            state.solve(np.ones(2))
        assert err.value.iteration == 0

    def test_nonfinite_gradient(self):
        class Bad(QuadraticProblem):
            def gradient(self, x):
                return np.full(2, np.nan)

        with pytest.raises(NonFinite):
            run(Bad(np.eye(2), np.zeros(2)), SolverConfig(), np.ones(2))

    def test_divergence(self):
        class Wrong(QuadraticProblem):
            # claims a tiny L so G0 under-estimates the Hessian and the steps blow up
            def __post_init__(self):
                super().__post_init__()
                self.lip_l = 1e-3

        q = Wrong(np.diag([1.0, 100.0]), np.zeros(2))
        with pytest.raises(Diverged):
            run(q, SolverConfig(method="block_bfgs", strategy="randomized", k=1, divergence_factor=10.0), np.ones(2))


def test_lambda_stopping(logistic):
    recs = run(logistic, SolverConfig(k=4, lam_tol=1e-6, grad_tol=0.0), np.zeros(20))
    assert recs[-1].stop_reason == "lam_tol"
    assert recs[-1].lam <= 1e-6 < recs[-2].lam
    with pytest.raises(ConfigError):
        SolverConfig(lam_tol=-1.0).validate(3)


def test_gradient_descent_decreases(logistic):
    x0 = np.zeros(20)
    x = gradient_descent(logistic, x0, 10)
    assert logistic.value(x) < logistic.value(x0)
    assert np.array_equal(gradient_descent(logistic, x0, 0), x0)


def test_inverse_mode_enum():
    assert SolverConfig(inverse_mode="woodbury").inverse_mode is InverseMode.WOODBURY
    assert SolverConfig(method="newton").method is Method.NEWTON
