"""Procrustes, Kronecker-ridge and Sylvester solve kernels."""

import numpy as np
import pytest

from grtt import (
    RankDeficiencyWarning,
    SingularPairError,
    SymEigPair,
    kron_ridge_solve,
    nearest_orthogonal,
    spectral_norm,
    sylvester_sym_solve,
    sym_eig,
)


def random_orthonormal(p, q, rng):
    m, _ = np.linalg.qr(rng.standard_normal((p, q)))
    return m


class TestNearestOrthogonal:
    def test_orthonormal_is_fixed_point(self):
        rng = np.random.default_rng(0)
        q = random_orthonormal(6, 4, rng)
        assert np.allclose(nearest_orthogonal(q), q, atol=1e-12)

    def test_positive_diagonal_maps_to_identity(self):
        m = np.diag([2.0, 0.5])
        assert np.allclose(nearest_orthogonal(m), np.eye(2), atol=1e-12)

    def test_orthonormal_columns_always(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            m = rng.standard_normal((int(rng.integers(3, 9)), int(rng.integers(1, 4))))
            q = nearest_orthogonal(m)
            assert np.linalg.norm(q.T @ q - np.eye(q.shape[1])) <= 1e-10

    def test_minimizes_distance_over_random_candidates(self):
        rng = np.random.default_rng(2)
        m = rng.standard_normal((5, 3))
        best = np.linalg.norm(m - nearest_orthogonal(m))
        for _ in range(1000):
            q = random_orthonormal(5, 3, rng)
            assert best <= np.linalg.norm(m - q) + 1e-12

    def test_rank_deficient_warns_and_stays_orthonormal(self):
        m = np.zeros((5, 3))
        m[:, 0] = 1.0
        with pytest.warns(RankDeficiencyWarning):
            q = nearest_orthogonal(m)
        assert np.linalg.norm(q.T @ q - np.eye(3)) <= 1e-10

    def test_wide_matrix_rejected(self):
        with pytest.raises(ValueError):
            nearest_orthogonal(np.zeros((2, 5)))


class TestKronRidgeSolve:
    def test_zero_operands_scale_rhs(self):
        rhs = np.arange(1.0, 5.0)
        got = kron_ridge_solve(np.zeros((2, 2)), np.zeros((2, 2)), 4.0, rhs)
        assert np.allclose(got, rhs / 4.0, atol=1e-12)

    def test_scalar_operands(self):
        rhs = np.array([5.0])
        got = kron_ridge_solve(np.array([[2.0]]), np.array([[3.0]]), 1.0, rhs)
        assert np.allclose(got, rhs / 13.0, atol=1e-12)

    def test_matches_dense_kronecker_solve(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            p, q = int(rng.integers(1, 5)), int(rng.integers(1, 5))
            a = rng.standard_normal((p, p))
            a = a @ a.T
            b = rng.standard_normal((q, q))
            b = b @ b.T
            gamma = float(rng.uniform(0.1, 5.0))
            rhs = rng.standard_normal(p * q)
            dense = 2.0 * np.kron(b, a) + gamma * np.eye(p * q)
            want = np.linalg.solve(dense, rhs)
            got = kron_ridge_solve(a, b, gamma, rhs)
            assert np.linalg.norm(got - want) <= 1e-8 * np.linalg.norm(want)

    def test_residual_bound(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((4, 4))
        a = a @ a.T
        b = rng.standard_normal((3, 3))
        b = b @ b.T
        rhs = rng.standard_normal(12)
        x = kron_ridge_solve(a, b, 0.7, rhs)
        xm = x.reshape((4, 3), order="F")
        resid = 2.0 * (a @ xm @ b).reshape(-1, order="F") + 0.7 * x - rhs
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(rhs)

    def test_accepts_precomputed_eigendecompositions(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 3))
        a = a @ a.T
        b = rng.standard_normal((2, 2))
        b = b @ b.T
        rhs = rng.standard_normal(6)
        direct = kron_ridge_solve(a, b, 1.5, rhs)
        cached = kron_ridge_solve(sym_eig(a), sym_eig(b), 1.5, rhs)
        assert np.allclose(direct, cached, atol=1e-12)

    def test_rejects_nonpositive_gamma(self):
        with pytest.raises(ValueError):
            kron_ridge_solve(np.eye(2), np.eye(2), 0.0, np.zeros(4))


class TestSylvesterSymSolve:
    def test_zero_b_reduces_to_plain_solve(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((4, 4))
        a = a @ a.T + 4.0 * np.eye(4)
        c = rng.standard_normal((4, 3))
        got = sylvester_sym_solve(a, np.zeros((3, 3)), c)
        assert np.allclose(got, np.linalg.solve(a, c), atol=1e-10)

    def test_identity_pair_halves(self):
        c = np.arange(6.0).reshape((2, 3))
        assert np.allclose(sylvester_sym_solve(np.eye(2), np.eye(3), c), c / 2.0)

    def test_matches_vectorized_solve(self):
        rng = np.random.default_rng(7)
        for m, s in ((4, 4), (6, 6), (3, 5)):
            a = rng.standard_normal((m, m))
            a = a @ a.T + 0.5 * np.eye(m)
            b = rng.standard_normal((s, s))
            b = b @ b.T + 0.5 * np.eye(s)
            c = rng.standard_normal((m, s))
            big = np.kron(np.eye(s), a) + np.kron(b.T, np.eye(m))
            want = np.linalg.solve(big, c.reshape(-1, order="F")).reshape((m, s), order="F")
            got = sylvester_sym_solve(a, b, c)
            assert np.linalg.norm(got - want) <= 1e-7 * np.linalg.norm(want)

    def test_residual_bound(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((5, 5))
        a = a @ a.T + np.eye(5)
        b = rng.standard_normal((4, 4))
        b = b @ b.T + np.eye(4)
        c = rng.standard_normal((5, 4))
        x = sylvester_sym_solve(a, b, c)
        assert np.linalg.norm(a @ x + x @ b - c) <= 1e-7 * np.linalg.norm(c)

    def test_singular_pair_raises(self):
        a = np.diag([0.0, 1.0])
        b = np.diag([0.0, 2.0])
        with pytest.raises(SingularPairError):
            sylvester_sym_solve(a, b, np.ones((2, 2)))

    def test_ridge_clears_singular_pair(self):
        a = np.diag([0.0, 1.0])
        b = np.diag([0.0, 2.0])
        c = np.ones((2, 2))
        x = sylvester_sym_solve(a, b, c, ridge=1e-6)
        assert np.all(np.isfinite(x))
        resid = a @ x + x @ b + 1e-6 * x - c
        assert np.linalg.norm(resid) <= 1e-7 * np.linalg.norm(c)

    def test_accepts_precomputed_eigendecompositions(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((3, 3))
        a = a @ a.T + np.eye(3)
        b = rng.standard_normal((2, 2))
        b = b @ b.T + np.eye(2)
        c = rng.standard_normal((3, 2))
        assert np.allclose(
            sylvester_sym_solve(a, b, c),
            sylvester_sym_solve(sym_eig(a), sym_eig(b), c),
            atol=1e-12,
        )


class TestSpectralNorm:
    def test_identity(self):
        assert spectral_norm(np.eye(4)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert spectral_norm(np.diag([1.0, 4.0, 9.0])) == pytest.approx(9.0)

    def test_matches_eigh_on_random_psd(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            m = rng.standard_normal((5, 5))
            m = m @ m.T
            assert spectral_norm(m) == pytest.approx(np.linalg.eigvalsh(m)[-1])

    def test_kronecker_product_multiplies(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((3, 3))
        a = a @ a.T
        b = rng.standard_normal((2, 2))
        b = b @ b.T
        assert spectral_norm(np.kron(a, b)) == pytest.approx(spectral_norm(a) * spectral_norm(b))

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            spectral_norm(np.zeros((2, 3)))
