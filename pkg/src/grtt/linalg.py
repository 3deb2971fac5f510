"""Dense factorization and structured-solve kernels for the ADMM updates.

Each solve is specified by a residual bound, and the tests enforce exactly
that bound; SVD and symmetric eigendecompositions are delegated to LAPACK
through numpy.
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

__all__ = [
    "RankDeficiencyWarning",
    "SingularPairError",
    "SymEigPair",
    "sym_eig",
    "nearest_orthogonal",
    "kron_ridge_solve",
    "sylvester_sym_solve",
    "spectral_norm",
]


class RankDeficiencyWarning(UserWarning):
    """The Procrustes target was rank deficient; the factor is not unique."""


class SingularPairError(ValueError):
    """A + B eigenvalue pair sums to zero, so the Sylvester system is singular."""


class SymEigPair(NamedTuple):
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(m: np.ndarray) -> SymEigPair:
    """Symmetric eigendecomposition with ascending eigenvalues."""
    w, q = np.linalg.eigh(m)
    return SymEigPair(w, q)


def _as_eig(m) -> SymEigPair:
    if isinstance(m, SymEigPair):
        return m
    return sym_eig(np.asarray(m, dtype=float))


def nearest_orthogonal(m: np.ndarray) -> np.ndarray:
    """Closest matrix with orthonormal columns to `m` (p x q, p >= q).

    Returns the polar factor A @ B.T of the thin SVD m = A S B.T, which
    minimizes ||m - Q||_F over all Q with Q.T Q = I. If `m` is rank
    deficient the minimizer is not unique; the missing directions are
    completed with the orthonormal basis LAPACK returns and a
    :class:`RankDeficiencyWarning` is emitted.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < m.shape[1]:
        raise ValueError("nearest_orthogonal expects a tall (p >= q) matrix")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= 1e-13 * s[0]:
        warnings.warn(
            "rank-deficient Procrustes target; orthogonal factor is not unique",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return u @ vt


def kron_ridge_solve(
    a: np.ndarray | SymEigPair,
    b: np.ndarray | SymEigPair,
    gamma: float,
    rhs: np.ndarray,
) -> np.ndarray:
    """Solve (2*(B kron A) + gamma*I) x = rhs without forming the Kronecker.

    `a` (p x p) and `b` (q x q) are symmetric PSD; `rhs` has length p*q and
    is interpreted as vec of a p x q matrix (first index fastest), matching
    the identity kron(B, A) @ vec(X) = vec(A @ X @ B) for symmetric B.
    Either operand may be passed pre-decomposed as a :class:`SymEigPair`.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    wa, qa = _as_eig(a)
    wb, qb = _as_eig(b)
    r = np.asarray(rhs, dtype=float).reshape((wa.size, wb.size), order="F")
    t = qa.T @ r @ qb
    t /= 2.0 * np.outer(wa, wb) + gamma
    x = qa @ t @ qb.T
    return x.reshape(-1, order="F")


def sylvester_sym_solve(
    a: np.ndarray | SymEigPair,
    b: np.ndarray | SymEigPair,
    c: np.ndarray,
    ridge: float = 0.0,
) -> np.ndarray:
    """Solve A X + X B = C for symmetric PSD A (m x m) and B (s x s).

    Both sides are eigendecomposed and the transformed system is solved
    entrywise: Xt[i, j] = Ct[i, j] / (lam_i + mu_j + ridge). A zero
    denominator with ridge == 0 raises :class:`SingularPairError` (the
    null spaces of A and B meet; a graph Laplacian always contributes a
    zero eigenvalue). Either operand may be a precomputed
    :class:`SymEigPair`.
    """
    wa, qa = _as_eig(a)
    wb, qb = _as_eig(b)
    den = wa[:, None] + wb[None, :] + ridge
    scale = max(np.abs(wa).max(initial=0.0), np.abs(wb).max(initial=0.0), 1.0)
    if np.any(np.abs(den) <= 1e-14 * scale):
        if ridge == 0.0:
            raise SingularPairError(
                "A and B share a (near-)null direction; pass a positive ridge"
            )
        raise SingularPairError("ridge too small to clear the singular pair")
    c = np.asarray(c, dtype=float)
    ct = qa.T @ c @ qb
    return qa @ (ct / den) @ qb.T


def spectral_norm(a: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD matrix."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] != a.shape[1]:
        raise ValueError("spectral_norm expects a square symmetric matrix")
    return float(np.linalg.eigvalsh(a)[-1])
