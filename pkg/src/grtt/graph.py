"""Sample-similarity graph: k-NN adjacency, Laplacian, smoothness penalty."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fileio import atomic_write_text

__all__ = [
    "GraphLaplacian",
    "default_knn",
    "knn_adjacency",
    "build_graph",
    "graph_quadratic",
    "save_edge_list",
]


@dataclass
class GraphLaplacian:
    """Unnormalized Laplacian L = D - W of a binary undirected graph.

    adjacency, degrees and laplacian are integer arrays; adjacency is
    symmetric with a zero diagonal.
    """

    adjacency: np.ndarray
    degrees: np.ndarray
    laplacian: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum()) // 2


def default_knn(n_samples: int) -> int:
    """Neighbor count max(1, round(ln S)) used when none is given."""
    return max(1, round(math.log(n_samples)))


def knn_adjacency(samples: np.ndarray, k_nn: int | None = None) -> np.ndarray:
    """Symmetric binary k-NN adjacency on Frobenius distances.

    Parameters
    ----------
    samples : ndarray
        (S, ...) array, one sample per leading index; trailing modes are
        flattened for the distance computation.
    k_nn : int, optional
        Neighbors per node before symmetrization; defaults to
        max(1, round(ln S)). An edge {s, s'} exists when either endpoint
        lists the other among its k_nn nearest (ties toward lower index).

    Returns
    -------
    ndarray
        (S, S) int array, symmetric, zero diagonal.
    """
    flat = np.asarray(samples, dtype=float).reshape(samples.shape[0], -1)
    s = flat.shape[0]
    if s < 2:
        raise ValueError("need at least two samples to build a graph")
    if k_nn is None:
        k_nn = default_knn(s)
    if not 1 <= k_nn <= s - 1:
        raise ValueError(f"k_nn must lie in [1, {s - 1}], got {k_nn}")

    sq = np.sum(flat * flat, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (flat @ flat.T)
    np.fill_diagonal(d2, np.inf)
    # stable sort so equal distances resolve toward the lower index
    order = np.argsort(d2, axis=1, kind="stable")
    w = np.zeros((s, s), dtype=np.int64)
    rows = np.repeat(np.arange(s), k_nn)
    w[rows, order[:, :k_nn].ravel()] = 1
    w = w | w.T
    return w


def build_graph(samples: np.ndarray, k_nn: int | None = None) -> GraphLaplacian:
    """k-NN adjacency plus its degree vector and Laplacian."""
    w = knn_adjacency(samples, k_nn)
    deg = w.sum(axis=1)
    lap = np.diag(deg) - w
    return GraphLaplacian(adjacency=w, degrees=deg, laplacian=lap)


def graph_quadratic(embeddings: np.ndarray, graph: GraphLaplacian) -> float:
    """Smoothness penalty tr(M L M^T) of per-sample embeddings.

    embeddings holds one column (or one slab, flattened) per sample;
    equals half the adjacency-weighted sum of squared pairwise embedding
    distances.
    """
    m = np.asarray(embeddings, dtype=float)
    if m.ndim != 2:
        # sample mode in the middle: (r_k, S, r_{k+1}) -> columns per sample
        if m.ndim == 3:
            m = m.transpose(0, 2, 1).reshape(-1, m.shape[1])
        else:
            raise ValueError("embeddings must be a matrix or a 3-mode core")
    if m.shape[1] != graph.n_nodes:
        raise ValueError("embedding count does not match the graph size")
    return float(np.trace(m @ graph.laplacian @ m.T))


def save_edge_list(path, graph: GraphLaplacian) -> None:
    """Write one `s s'` pair per line (0-based, each edge once, s < s')."""
    i, j = np.nonzero(np.triu(graph.adjacency))
    lines = [f"{a} {b}" for a, b in zip(i.tolist(), j.tolist())]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
