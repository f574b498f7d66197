import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import spd
from srk.errors import DimensionMismatch, NotPositiveDefinite
from srk.matcore import (
    as_block,
    cholesky,
    gaussian_block,
    inv_sqrt_spd,
    inverse_spd,
    loewner_bounds,
    pinv_small,
    projector,
    solve_spd,
    spawn_rng,
    top_k_diag_basis,
)


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky(np.eye(2)).lower, np.eye(2))

    def test_diagonal(self):
        np.testing.assert_allclose(cholesky(np.diag([4.0, 9.0])).lower, np.diag([2.0, 3.0]))

    def test_reconstruction(self):
        b = np.random.default_rng(5).standard_normal((5, 5))
        m = b @ b.T + np.eye(5)
        f = cholesky(m)
        assert np.max(np.abs(f.matrix() - m)) < 1e-10
        assert f.dim == 5

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.diag([1.0, -1.0]))

    def test_rejects_small_pivot(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.diag([1.0, 1e-12]), pivot_tol=1e-3)

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionMismatch):
            cholesky(np.ones((2, 3)))


class TestSolve:
    def test_identity(self):
        np.testing.assert_allclose(solve_spd(cholesky(np.eye(2)), [3.0, 4.0]), [3.0, 4.0])

    def test_diagonal(self):
        np.testing.assert_allclose(solve_spd(cholesky(np.diag([2.0, 4.0])), [2.0, 4.0]), [1.0, 1.0])

    def test_residual(self, rng):
        m = spd(rng, 6)
        rhs = rng.standard_normal(6)
        x = solve_spd(cholesky(m), rhs)
        assert np.linalg.norm(m @ x - rhs) < 1e-8

    def test_block_rhs(self, rng):
        m = spd(rng, 6)
        rhs = rng.standard_normal((6, 3))
        np.testing.assert_allclose(m @ solve_spd(cholesky(m), rhs), rhs, atol=1e-10)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve_spd(cholesky(np.eye(3)), np.ones(2))

    def test_inverse(self, rng):
        m = spd(rng, 5)
        np.testing.assert_allclose(inverse_spd(cholesky(m)) @ m, np.eye(5), atol=1e-10)


class TestPinv:
    def test_zero(self):
        np.testing.assert_array_equal(pinv_small(np.zeros((2, 2))), np.zeros((2, 2)))

    def test_rank_deficient_diagonal(self):
        np.testing.assert_allclose(pinv_small(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))

    def test_penrose_identity(self, rng):
        b = rng.standard_normal((4, 2))
        m = b @ b.T
        assert np.max(np.abs(m @ pinv_small(m) @ m - m)) < 1e-8

    def test_indefinite_invertible(self):
        m = np.diag([2.0, -4.0])
        np.testing.assert_allclose(pinv_small(m), np.diag([0.5, -0.25]))


class TestLoewner:
    def test_scaled_identity(self):
        assert loewner_bounds(2 * np.eye(3), np.eye(3)) == pytest.approx((2.0, 2.0))

    def test_diagonal(self):
        assert loewner_bounds(np.diag([1.0, 3.0]), np.eye(2)) == pytest.approx((1.0, 3.0))

    def test_dominating_pair(self, rng):
        a = spd(rng, 8)
        b = rng.standard_normal((8, 3))
        lo, hi = loewner_bounds(a + b @ b.T, a)
        assert lo >= 1.0 - 1e-12
        assert hi > 1.0

    def test_h_must_be_spd(self):
        with pytest.raises(NotPositiveDefinite):
            loewner_bounds(np.eye(2), np.diag([1.0, 0.0]))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            loewner_bounds(np.eye(2), np.eye(3))


class TestInvSqrt:
    def test_squares_to_inverse(self, rng):
        m = spd(rng, 4)
        s = inv_sqrt_spd(m)
        np.testing.assert_allclose(s @ m @ s, np.eye(4), atol=1e-10)

    def test_rejects_singular(self):
        with pytest.raises(NotPositiveDefinite):
            inv_sqrt_spd(np.diag([1.0, 0.0]))


class TestDirections:
    def test_gaussian_block_deterministic(self):
        a = gaussian_block(3, 1, spawn_rng(7))
        b = gaussian_block(3, 1, spawn_rng(7))
        np.testing.assert_array_equal(a, b)
        assert a.shape == (3, 1)

    def test_spawned_streams_differ(self):
        assert not np.array_equal(gaussian_block(4, 2, spawn_rng(7, 0)), gaussian_block(4, 2, spawn_rng(7, 1)))

    def test_gaussian_block_bounds(self):
        with pytest.raises(DimensionMismatch):
            gaussian_block(3, 4, spawn_rng(0))
        with pytest.raises(DimensionMismatch):
            gaussian_block(3, 0, spawn_rng(0))

    def test_rank_one_projection_mean(self):
        d, n = 200, 100_000
        u = spawn_rng(3).standard_normal((n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        mean = u.T @ u / n
        assert np.max(np.abs(mean - np.eye(d) / d)) <= 0.02

    def test_top_k_single(self):
        np.testing.assert_array_equal(top_k_diag_basis(np.diag([3.0, 1.0, 2.0]), 1), np.eye(3)[:, [0]])

    def test_top_k_pair(self):
        np.testing.assert_array_equal(top_k_diag_basis(np.diag([3.0, 1.0, 2.0]), 2), np.eye(3)[:, [0, 2]])

    def test_top_k_tie_goes_to_lowest_index(self):
        r = np.diag([2.0, 2.0, 1.0])
        u = top_k_diag_basis(r, 1)
        np.testing.assert_array_equal(u, np.eye(3)[:, [0]])
        assert np.trace(u.T @ r @ u) >= (1 / 3) * np.trace(r)

    @given(st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=12), st.data())
    def test_top_k_captures_average_share(self, diag, data):
        diag = np.array(diag)
        k = data.draw(st.integers(1, diag.size))
        u = top_k_diag_basis(diag, k)
        assert np.all(u.sum(axis=0) == 1.0)
        assert len(set(np.argmax(u, axis=0))) == k
        assert np.sum(u.T @ diag) >= k / diag.size * diag.sum() - 1e-9

    def test_as_block(self):
        assert as_block(np.ones(3), 3).shape == (3, 1)
        with pytest.raises(DimensionMismatch):
            as_block(np.ones((3, 4)), 3)
        with pytest.raises(DimensionMismatch):
            as_block(np.ones((2, 1)), 3)

    def test_projector(self, rng):
        u = rng.standard_normal((6, 2))
        p = projector(u)
        np.testing.assert_allclose(p @ p, p, atol=1e-12)
        np.testing.assert_allclose(p @ u, u, atol=1e-12)
        assert np.trace(p) == pytest.approx(2.0)
