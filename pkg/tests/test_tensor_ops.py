"""Unfolding, permutation and mode-product kernels."""

import numpy as np
import pytest

from grtt import (
    chain_merge,
    fold_left,
    fold_right,
    fold_tn,
    frobenius_norm,
    left_unfold,
    merge_product,
    permute_sample_mode,
    reshape_tn,
    right_unfold,
    vec,
)


def merge_oracle(a, modes_a, b, modes_b):
    """Brute-force contraction over explicit index loops."""
    modes_a = (modes_a,) if isinstance(modes_a, int) else tuple(modes_a)
    modes_b = (modes_b,) if isinstance(modes_b, int) else tuple(modes_b)
    keep_a = [i for i in range(a.ndim) if i not in modes_a]
    keep_b = [j for j in range(b.ndim) if j not in modes_b]
    out = np.zeros([a.shape[i] for i in keep_a] + [b.shape[j] for j in keep_b])
    for ia in np.ndindex(*a.shape):
        for ib in np.ndindex(*b.shape):
            if all(ia[m] == ib[n] for m, n in zip(modes_a, modes_b)):
                idx = tuple(ia[i] for i in keep_a) + tuple(ib[j] for j in keep_b)
                out[idx] += a[ia] * b[ib]
    return out


class TestReshapeTn:
    def test_shape_two_of_three_modes(self):
        x = np.arange(24.0).reshape((2, 3, 4))
        assert reshape_tn(x, 2).shape == (6, 4)

    def test_first_index_fastest_entry(self):
        # x(i,j,k) = 100i + 10j + k with 1-based indices
        x = np.zeros((2, 3, 4))
        for i in range(2):
            for j in range(3):
                for k in range(4):
                    x[i, j, k] = 100 * (i + 1) + 10 * (j + 1) + (k + 1)
        m = reshape_tn(x, 1)
        assert m.shape == (2, 12)
        assert m[1, 0] == 211.0

    def test_fold_roundtrip(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 4, 5, 2))
        for n in range(1, 4):
            m = reshape_tn(x, n)
            assert np.array_equal(fold_tn(m, x.shape), x)

    def test_rejects_bad_mode_count(self):
        x = np.zeros((2, 3))
        with pytest.raises(ValueError):
            reshape_tn(x, 0)
        with pytest.raises(ValueError):
            reshape_tn(x, 2)


class TestUnfoldings:
    def test_shapes(self):
        u = np.zeros((3, 4, 5))
        assert left_unfold(u).shape == (12, 5)
        assert right_unfold(u).shape == (3, 20)

    def test_left_unfold_single_entry(self):
        # entry (2,1,3) in 1-based index notation
        u = np.zeros((3, 4, 5))
        u[1, 0, 2] = 1.0
        m = left_unfold(u)
        assert m[1, 2] == 1.0
        assert np.count_nonzero(m) == 1

    def test_right_unfold_single_entry(self):
        u = np.zeros((3, 4, 5))
        u[1, 0, 2] = 1.0
        m = right_unfold(u)
        # column index pairs (mode-2, mode-3) with mode-2 fastest
        assert m[1, 0 + 4 * 2] == 1.0
        assert np.count_nonzero(m) == 1

    def test_fold_inverses(self):
        rng = np.random.default_rng(1)
        u = rng.standard_normal((3, 4, 5))
        assert np.array_equal(fold_left(left_unfold(u), u.shape), u)
        assert np.array_equal(fold_right(right_unfold(u), u.shape), u)


class TestPermuteSampleMode:
    def test_to_middle_shape(self):
        y = np.zeros((2, 3, 4, 7))  # sample mode last, S = 7
        assert permute_sample_mode(y, 2, "to-middle").shape == (2, 3, 7, 4)

    def test_roundtrip(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal((2, 3, 4, 5, 6))
        for k in range(1, 4):
            mid = permute_sample_mode(y, k, "to-middle")
            back = permute_sample_mode(mid, k, "to-last")
            assert np.array_equal(back, y)

    def test_single_entry_traces_through(self):
        y = np.zeros((2, 3, 4, 5))
        y[1, 2, 3, 4] = 1.0
        mid = permute_sample_mode(y, 2, "to-middle")
        assert mid[1, 2, 4, 3] == 1.0

    def test_rejects_unknown_direction(self):
        with pytest.raises(ValueError):
            permute_sample_mode(np.zeros((2, 2, 2)), 1, "sideways")


class TestMergeProduct:
    def test_chain_link_shape(self):
        a = np.ones((1, 2, 3))
        b = np.ones((3, 4, 1))
        out = merge_product(a, 2, b, 0)
        assert out.shape == (1, 2, 4, 1)

    def test_matches_matrix_product(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal((4, 6))
        b = rng.standard_normal((6, 5))
        assert np.allclose(merge_product(a, 1, b, 0), a @ b)

    def test_identity_slice_contraction(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((3, 4, 5))
        out = merge_product(a, 1, np.eye(4), 0)
        assert np.allclose(out, np.moveaxis(a, 1, -1))

    def test_multi_mode_contraction(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 4, 2))
        b = rng.standard_normal((3, 2, 5))
        out = merge_product(a, (0, 2), b, (0, 1))
        assert out.shape == (4, 5)
        assert np.allclose(out, merge_oracle(a, (0, 2), b, (0, 1)), atol=1e-12)

    def test_randomized_brute_force_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            nd_a = int(rng.integers(1, 4))
            nd_b = int(rng.integers(1, 4))
            shape_a = tuple(int(d) for d in rng.integers(1, 5, size=nd_a))
            shape_b = list(int(d) for d in rng.integers(1, 5, size=nd_b))
            n_c = int(rng.integers(1, min(nd_a, nd_b) + 1))
            modes_a = tuple(int(m) for m in rng.choice(nd_a, size=n_c, replace=False))
            modes_b = tuple(int(m) for m in rng.choice(nd_b, size=n_c, replace=False))
            for ma, mb in zip(modes_a, modes_b):
                shape_b[mb] = shape_a[ma]
            a = rng.standard_normal(shape_a)
            b = rng.standard_normal(tuple(shape_b))
            got = merge_product(a, modes_a, b, modes_b)
            want = merge_oracle(a, modes_a, b, modes_b)
            scale = max(np.abs(want).max(), 1e-12)
            assert np.abs(got - want).max() <= 1e-10 * scale

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            merge_product(np.zeros((2, 3)), 1, np.zeros((4, 5)), 0)


class TestChainMerge:
    def test_matches_pairwise_merges(self):
        rng = np.random.default_rng(7)
        a = rng.standard_normal((1, 3, 2))
        b = rng.standard_normal((2, 4, 3))
        c = rng.standard_normal((3, 5, 1))
        step = merge_product(merge_product(a, 2, b, 0), 3, c, 0)
        assert np.allclose(chain_merge([a, b, c]), step, atol=1e-12)

    def test_single_tensor_passthrough(self):
        a = np.ones((1, 2, 3))
        assert chain_merge([a]) is a

    def test_empty_chain_rejected(self):
        with pytest.raises(ValueError):
            chain_merge([])


class TestNormAndVec:
    def test_frobenius_examples(self):
        assert frobenius_norm(np.zeros((3, 3))) == 0.0
        assert frobenius_norm(np.array([2.0, 2.0, 1.0])) == 3.0
        assert frobenius_norm(np.ones((2, 2))) == 2.0

    def test_vec_first_index_fastest(self):
        m = np.array([[1.0, 3.0], [2.0, 4.0]])
        assert np.array_equal(vec(m), np.array([1.0, 2.0, 3.0, 4.0]))
