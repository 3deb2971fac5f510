"""Dense tensor reshaping, permutation and contraction primitives.

Every matricization and vectorization in this package uses one fixed
linearization: first index fastest (colexicographic), i.e. numpy
``order="F"``. Under this convention ``vec(A @ X @ B.T) == kron(B, A) @
vec(X)``, which is what the solver's Kronecker-structured updates rely on.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "reshape_tn",
    "fold_tn",
    "left_unfold",
    "right_unfold",
    "fold_left",
    "fold_right",
    "permute_sample_mode",
    "merge_product",
    "chain_merge",
    "frobenius_norm",
    "vec",
]


def reshape_tn(x: np.ndarray, n: int) -> np.ndarray:
    """Matricize a tensor by grouping the first `n` modes as rows.

    Parameters
    ----------
    x : ndarray
        Tensor with N >= 2 modes.
    n : int
        Number of leading modes grouped into the row index, 1 <= n <= N-1.

    Returns
    -------
    ndarray
        Matrix of shape (I_1*...*I_n, I_{n+1}*...*I_N), first index fastest
        within both the row and the column grouping.
    """
    if not 1 <= n <= x.ndim - 1:
        raise ValueError(f"mode count n={n} out of range for order-{x.ndim} tensor")
    rows = math.prod(x.shape[:n])
    return x.reshape((rows, -1), order="F")


def fold_tn(m: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`reshape_tn`: restore a matrix to tensor `shape`."""
    if m.size != math.prod(shape):
        raise ValueError(f"cannot fold {m.size} entries into shape {shape}")
    return m.reshape(shape, order="F")


def left_unfold(x: np.ndarray) -> np.ndarray:
    """All modes except the last as rows: shape (I_1*...*I_{N-1}, I_N)."""
    if x.ndim < 2:
        raise ValueError("left_unfold requires an order >= 2 tensor")
    return reshape_tn(x, x.ndim - 1)


def right_unfold(x: np.ndarray) -> np.ndarray:
    """First mode as rows: shape (I_1, I_2*...*I_N)."""
    if x.ndim < 2:
        raise ValueError("right_unfold requires an order >= 2 tensor")
    return reshape_tn(x, 1)


def fold_left(m: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`left_unfold` for a target tensor `shape`."""
    return fold_tn(m, shape)


def fold_right(m: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of :func:`right_unfold` for a target tensor `shape`."""
    return fold_tn(m, shape)


def permute_sample_mode(y: np.ndarray, k: int, direction: str) -> np.ndarray:
    """Move the sample mode between the last position and position k+1.

    "to-middle" takes a tensor with the sample mode last,
    (I_1,...,I_N, S), and returns (I_1,...,I_k, S, I_{k+1},...,I_N); modes
    beyond the split shift by one. "to-last" is its exact inverse.

    Parameters
    ----------
    y : ndarray
        Input tensor (sample mode last for "to-middle", at position k+1
        for "to-last").
    k : int
        Split index; number of modes kept to the left of the sample mode.
    direction : {"to-middle", "to-last"}

    Returns
    -------
    ndarray
        Permuted tensor (a view when numpy allows it).
    """
    if not 0 <= k <= y.ndim - 1:
        raise ValueError(f"split index k={k} out of range for order-{y.ndim} tensor")
    if direction == "to-middle":
        return np.moveaxis(y, -1, k)
    if direction == "to-last":
        return np.moveaxis(y, k, -1)
    raise ValueError(f"unknown direction {direction!r}")


def merge_product(
    a: np.ndarray,
    modes_a: int | tuple[int, ...],
    b: np.ndarray,
    modes_b: int | tuple[int, ...],
) -> np.ndarray:
    """Tensor merging product: contract `a` and `b` along paired modes.

    Mode indices are 0-based. ``modes_a[i]`` of `a` is summed against
    ``modes_b[i]`` of `b`; the result carries the remaining modes of `a`
    (in order) followed by the remaining modes of `b` (in order). The
    single-mode case is the chain product used to string TT factors
    together; the pair case covers the crossed adjacent-mode form and the
    multi-mode patterns the graph regularizer needs.

    Parameters
    ----------
    a, b : ndarray
    modes_a, modes_b : int or tuple of int
        Modes to contract, pairwise. Sizes must match pairwise.

    Returns
    -------
    ndarray
    """
    ma = (modes_a,) if isinstance(modes_a, int) else tuple(modes_a)
    mb = (modes_b,) if isinstance(modes_b, int) else tuple(modes_b)
    if len(ma) != len(mb):
        raise ValueError("modes_a and modes_b must pair up one-to-one")
    if len(set(ma)) != len(ma) or len(set(mb)) != len(mb):
        raise ValueError("contracted modes must not repeat")
    for p, q in zip(ma, mb):
        if not 0 <= p < a.ndim or not 0 <= q < b.ndim:
            raise ValueError(f"mode pair ({p}, {q}) out of range")
        if a.shape[p] != b.shape[q]:
            raise ValueError(
                f"mode size mismatch: a mode {p} has size {a.shape[p]}, "
                f"b mode {q} has size {b.shape[q]}"
            )
    return np.tensordot(a, b, axes=(list(ma), list(mb)))


def chain_merge(tensors) -> np.ndarray:
    """Contract a sequence left to right, last mode against first mode.

    This is the TT chain U_1 x U_2 x ... where each link sums the trailing
    rank mode of the running product against the leading rank mode of the
    next tensor.
    """
    tensors = list(tensors)
    if not tensors:
        raise ValueError("chain_merge needs at least one tensor")
    out = tensors[0]
    for t in tensors[1:]:
        out = merge_product(out, out.ndim - 1, t, 0)
    return out


def frobenius_norm(x: np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    return float(np.linalg.norm(np.asarray(x).ravel()))


def vec(x: np.ndarray) -> np.ndarray:
    """Flatten under the package-wide first-index-fastest convention."""
    return x.reshape(-1, order="F")
