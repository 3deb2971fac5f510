"""Tensor-train model with a sample core: TT-SVD, contractions, storage, IO.

A model of order N holds factors U_1 ... U_N around a sample core X of
shape (r_k, S, r_{k+1}); factor n is (r_{n-1}, I_n, r_n) left of the split
and (r_n, I_n, r_{n+1}) right of it, with boundary ranks r_0 = r_{N+1} = 1.
Left factors are kept left-orthogonal, right factors right-orthogonal.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .fileio import atomic_write_bytes
from .tensor_ops import chain_merge, left_unfold, right_unfold

__all__ = [
    "TTModel",
    "select_split_index",
    "tt_svd",
    "contract_boundary",
    "reconstruct",
    "storage_cost",
    "save_model",
    "load_model",
]

ORTH_TOL = 1e-10

MAGIC = b"GRTT"
FORMAT_VERSION = 1


@dataclass
class TTModel:
    """Ordered TT factors plus split metadata.

    Parameters
    ----------
    factors : list of ndarray
        Order-3 cores, shapes as in the module docstring.
    split_index : int
        k, the number of factors left of the sample core; 1 <= k <= N-1.
    orth : list of str or None
        Per-factor orthogonality state, "left", "right" or None. Flags are
        only ever set after the corresponding unfolding passed the
        orthogonality test.
    """

    factors: list[np.ndarray]
    split_index: int
    orth: list[str | None] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.factors)
        if n < 2:
            raise ValueError("a TT model needs at least two factors")
        if not 1 <= self.split_index <= n - 1:
            raise ValueError(f"split index {self.split_index} out of range for {n} factors")
        for i, f in enumerate(self.factors):
            if f.ndim != 3:
                raise ValueError(f"factor {i} is not a 3-mode tensor")
        if self.factors[0].shape[0] != 1 or self.factors[-1].shape[2] != 1:
            raise ValueError("boundary ranks must be 1")
        k = self.split_index
        for i in range(n - 1):
            if i == k - 1:
                continue  # the sample core sits between factors k-1 and k
            if self.factors[i].shape[2] != self.factors[i + 1].shape[0]:
                raise ValueError(f"rank mismatch between factors {i} and {i + 1}")
        if not self.orth:
            self.orth = [None] * n

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(f.shape[1] for f in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        """(r_1, ..., r_N); r_k and r_{k+1} border the sample core."""
        k = self.split_index
        left = tuple(f.shape[2] for f in self.factors[:k])
        right = tuple(f.shape[0] for f in self.factors[k:])
        return left + right

    @property
    def embedding_shape(self) -> tuple[int, int]:
        """(r_k, r_{k+1}): the per-sample projection matrix size."""
        r = self.ranks
        k = self.split_index
        return r[k - 1], r[k]

    def orthogonality_defect(self, n: int) -> float:
        """||Q.T Q - I||_F of factor n's canonical unfolding (0-based n)."""
        f = self.factors[n]
        if n < self.split_index:
            q = left_unfold(f)
        else:
            q = right_unfold(f).T
        g = q.T @ q
        return float(np.linalg.norm(g - np.eye(g.shape[0])))

    def refresh_orth_flags(self, tol: float = ORTH_TOL) -> None:
        """Measure each factor and set flags only where the test passes."""
        for i in range(self.order):
            if self.orthogonality_defect(i) <= tol:
                self.orth[i] = "left" if i < self.split_index else "right"
            else:
                self.orth[i] = None


def select_split_index(shape) -> int:
    """Split position balancing the left/right mode-size products.

    Returns k in {1, ..., N-1} minimizing |prod(I_1..I_k) - prod(I_{k+1}..I_N)|,
    ties broken toward smaller k.
    """
    shape = tuple(shape)
    if len(shape) < 2:
        raise ValueError("need at least two modes to split")
    total = math.prod(shape)
    best_k, best_gap = 1, None
    left = 1
    for k in range(1, len(shape)):
        left *= shape[k - 1]
        gap = abs(left - total // left) if total % left == 0 else abs(left - total / left)
        if best_gap is None or gap < best_gap:
            best_k, best_gap = k, gap
    return best_k


def _select_rank(s: np.ndarray, tau: float, cap: int | None) -> int:
    if cap is not None:
        return max(1, min(int(cap), s.size))
    if s.size == 0 or s[0] <= 0.0:
        return 1
    return max(1, int(np.count_nonzero(s >= tau * s[0])))


def tt_svd(
    y_permuted: np.ndarray,
    split_index: int,
    tau: float = 0.5,
    ranks=None,
) -> tuple[TTModel, np.ndarray]:
    """Sequential SVD sweep of a sample-in-the-middle data tensor.

    Parameters
    ----------
    y_permuted : ndarray
        Data tensor of shape (I_1, ..., I_k, S, I_{k+1}, ..., I_N): the
        sample mode already sits at the split position.
    split_index : int
        k, the number of data modes left of the sample mode.
    tau : float
        Relative truncation in (0, 1]: at each SVD, singular values below
        tau times the largest are discarded (at least one is kept).
    ranks : sequence of int, optional
        Explicit (r_1, ..., r_N) overriding the tau rule, each capped by
        the TT-SVD bound of its unfolding.

    Returns
    -------
    (TTModel, ndarray)
        Left-orthogonal factors for modes <= k, right-orthogonal factors
        for modes > k, and the sample core X of shape (r_k, S, r_{k+1}).
    """
    y = np.asarray(y_permuted, dtype=float)
    if y.size == 0:
        raise ValueError("empty tensor")
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    n_modes = y.ndim - 1
    k = split_index
    if not 1 <= k <= n_modes - 1:
        raise ValueError(f"split index {k} out of range for {n_modes} data modes")
    if ranks is not None:
        ranks = tuple(int(r) for r in ranks)
        if len(ranks) != n_modes:
            raise ValueError(f"expected {n_modes} ranks, got {len(ranks)}")

    dims = y.shape
    n_samples = dims[k]

    factors: list[np.ndarray | None] = [None] * n_modes
    c = y.reshape((1, -1), order="F")
    r_prev = 1
    for i in range(k):
        c = c.reshape((r_prev * dims[i], -1), order="F")
        u, s, vt = np.linalg.svd(c, full_matrices=False)
        r = _select_rank(s, tau, None if ranks is None else ranks[i])
        factors[i] = u[:, :r].reshape((r_prev, dims[i], r), order="F")
        c = s[:r, None] * vt[:r]
        r_prev = r

    # c is now (r_k, S * I_{k+1} * ... * I_N); peel the right modes off the tail
    r_next = 1
    for j in range(n_modes - 1, k - 1, -1):
        c = c.reshape((-1, dims[j + 1] * r_next), order="F")
        u, s, vt = np.linalg.svd(c, full_matrices=False)
        r = _select_rank(s, tau, None if ranks is None else ranks[j])
        factors[j] = vt[:r].reshape((r, dims[j + 1], r_next), order="F")
        c = u[:, :r] * s[:r]
        r_next = r

    x = c.reshape((r_prev, n_samples, r_next), order="F")
    model = TTModel(factors=factors, split_index=k)
    model.refresh_orth_flags()
    return model, x


def contract_boundary(model: TTModel, side: str) -> np.ndarray:
    """Contract one side of the chain into its boundary matrix.

    "left" gives U_{<=k} of shape (I_1*...*I_k, r_k); "right" gives U_{>k}
    of shape (r_{k+1}, I_{k+1}*...*I_N). If every factor on the requested
    side is flagged orthogonal, the output is left/right orthogonal too.
    """
    k = model.split_index
    if side == "left":
        return left_unfold(chain_merge(model.factors[:k]))
    if side == "right":
        return right_unfold(chain_merge(model.factors[k:]))
    raise ValueError(f"unknown side {side!r}")


def reconstruct(model: TTModel, x: np.ndarray) -> np.ndarray:
    """Contract factors and sample core back to the full (permuted) tensor.

    Returns the dense tensor of shape (I_1, ..., I_k, S, I_{k+1}, ..., I_N),
    i.e. with the sample mode at the split position.
    """
    k = model.split_index
    rk, rk1 = model.embedding_shape
    if x.ndim != 3 or x.shape[0] != rk or x.shape[2] != rk1:
        raise ValueError(
            f"embedding shape {x.shape} does not match model ranks ({rk}, S, {rk1})"
        )
    full = chain_merge(model.factors[:k] + [x] + model.factors[k:])
    return full.reshape(full.shape[1:-1])  # strip the two boundary 1-modes


def storage_cost(model: TTModel, x: np.ndarray) -> int:
    """Total scalar count of the factors plus the per-sample embeddings."""
    return int(sum(f.size for f in model.factors) + x.size)


def save_model(path, model: TTModel, x: np.ndarray) -> None:
    """Write the GRTT container (see README for the exact layout).

    Header: magic "GRTT", u32 format version, u32 N, u32 k, u32 S, then N
    u32 mode sizes and N u32 ranks; all integers little-endian. Payload:
    each factor then the sample core, little-endian float64, first index
    fastest. The write is atomic.
    """
    shape = model.shape
    ranks = model.ranks
    header = MAGIC + struct.pack(
        "<4I", FORMAT_VERSION, model.order, model.split_index, x.shape[1]
    )
    header += struct.pack(f"<{model.order}I", *shape)
    header += struct.pack(f"<{model.order}I", *ranks)
    chunks = [header]
    for f in model.factors:
        chunks.append(np.asarray(f, dtype="<f8").reshape(-1, order="F").tobytes())
    chunks.append(np.asarray(x, dtype="<f8").reshape(-1, order="F").tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def load_model(path) -> tuple[TTModel, np.ndarray]:
    """Read a GRTT container back into a model and its embeddings."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise ValueError("not a GRTT model file (bad magic)")
    version, order, k, n_samples = struct.unpack_from("<4I", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported GRTT format version {version}")
    off = 4 + 16
    shape = struct.unpack_from(f"<{order}I", data, off)
    off += 4 * order
    ranks = struct.unpack_from(f"<{order}I", data, off)
    off += 4 * order

    factors = []
    for i in range(order):
        if i < k:
            fshape = (ranks[i - 1] if i > 0 else 1, shape[i], ranks[i])
        else:
            fshape = (ranks[i], shape[i], ranks[i + 1] if i + 1 < order else 1)
        count = math.prod(fshape)
        flat = np.frombuffer(data, dtype="<f8", count=count, offset=off)
        off += 8 * count
        factors.append(flat.reshape(fshape, order="F").astype(float))
    rk, rk1 = ranks[k - 1], ranks[k]
    count = rk * n_samples * rk1
    flat = np.frombuffer(data, dtype="<f8", count=count, offset=off)
    off += 8 * count
    if off != len(data):
        raise ValueError("trailing bytes in GRTT model file")
    x = flat.reshape((rk, n_samples, rk1), order="F").astype(float)
    model = TTModel(factors=factors, split_index=k)
    model.refresh_orth_flags()
    return model, x
