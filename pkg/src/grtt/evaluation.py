"""Clustering evaluation: k-means, NMI, truncation sweeps, weight selection."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .fileio import atomic_write_text
from .graph import build_graph
from .solver import SolverAbort, SolverConfig, run
from .tt import storage_cost

__all__ = [
    "ClusterResult",
    "ExperimentRecord",
    "kmeans",
    "nmi",
    "embedding_vectors",
    "run_sweep",
    "lambda_scores",
    "select_lambda",
    "DEFAULT_LAMBDA_GRID",
    "CSV_HEADER",
    "format_ranks",
    "write_records_csv",
    "write_plot_companion",
]

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = tuple(10.0 ** i for i in range(-3, 4))

CSV_HEADER = "method,tau,ranks,storage,nmi,time_s,lambda,seed"

KMEANS_MAX_ITER = 300


@dataclass
class ClusterResult:
    assignments: np.ndarray
    inertia: float
    iterations: int


@dataclass
class ExperimentRecord:
    """One sweep cell: what was run and how well it clustered."""

    method: str
    tau: float | None
    ranks: tuple[int, ...] | None
    storage: int
    nmi: float
    time_s: float
    lambda_: float | None
    seed: int


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    sp = np.sum(points * points, axis=1)
    sc = np.sum(centers * centers, axis=1)
    d2 = sp[:, None] + sc[None, :] - 2.0 * (points @ centers.T)
    return np.maximum(d2, 0.0)


def kmeans(points, k: int, seed: int = 0) -> ClusterResult:
    """Lloyd iteration with greedy farthest-point seeding.

    The first centroid is a seed-chosen point, each further one the point
    farthest from all chosen so far; iteration stops when assignments
    repeat or after 300 rounds. An emptied cluster is re-seeded at the
    point farthest from its current centroid. Deterministic given seed.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        pts = pts.reshape(pts.shape[0], -1)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")

    rng = np.random.default_rng(seed)
    first = int(rng.integers(n))
    chosen = [first]
    d2 = np.sum((pts - pts[first]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d2))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((pts - pts[nxt]) ** 2, axis=1))
    centers = pts[chosen].copy()

    assign = None
    iterations = 0
    for iterations in range(1, KMEANS_MAX_ITER + 1):
        dist2 = _pairwise_sq_dists(pts, centers)
        new_assign = np.argmin(dist2, axis=1)
        own = dist2[np.arange(n), new_assign]
        for j in range(k):
            if not np.any(new_assign == j):
                far = int(np.argmax(own))
                new_assign[far] = j
                own[far] = 0.0
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(k):
            centers[j] = pts[assign == j].mean(axis=0)
    inertia = float(np.sum(np.sum((pts - centers[assign]) ** 2, axis=1)))
    return ClusterResult(assignments=assign, inertia=inertia, iterations=iterations)


def _first_occurrence_relabel(labels: np.ndarray) -> np.ndarray:
    seen: dict = {}
    out = np.empty(labels.size, dtype=np.int64)
    for i, v in enumerate(labels.tolist()):
        out[i] = seen.setdefault(v, len(seen))
    return out


def nmi(labels_a, labels_b) -> float:
    """Mutual information over the square root of the entropy product.

    Symmetric, relabel-invariant, in [0, 1]. When either side is a
    single cluster the ratio is 0/0; the value is then 1 if the two
    partitions are identical up to relabeling and 0 otherwise.
    """
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.size == 0 or a.size != b.size:
        raise ValueError("label vectors must be nonempty and equally long")
    n = a.size
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    cont = np.zeros((int(ia.max()) + 1, int(ib.max()) + 1))
    np.add.at(cont, (ia, ib), 1.0)
    pa = cont.sum(axis=1) / n
    pb = cont.sum(axis=0) / n
    ha = float(-np.sum(pa * np.log(pa, where=pa > 0, out=np.zeros_like(pa))))
    hb = float(-np.sum(pb * np.log(pb, where=pb > 0, out=np.zeros_like(pb))))
    if ha == 0.0 or hb == 0.0:
        same = np.array_equal(_first_occurrence_relabel(a), _first_occurrence_relabel(b))
        return 1.0 if same else 0.0
    pab = cont / n
    outer = np.outer(pa, pb)
    mask = pab > 0
    info = float(np.sum(pab[mask] * np.log(pab[mask] / outer[mask])))
    value = info / np.sqrt(ha * hb)
    return float(min(max(value, 0.0), 1.0))


def embedding_vectors(x: np.ndarray) -> np.ndarray:
    """One flattened embedding per row from the (r_k, S, r_{k+1}) core."""
    return x.transpose(1, 0, 2).reshape(x.shape[1], -1)


def _mean_cluster_nmi(points, labels, n_classes, repeats, seed) -> float:
    scores = [
        nmi(kmeans(points, n_classes, seed=seed + j).assignments, labels)
        for j in range(repeats)
    ]
    return float(np.mean(scores))


def run_sweep(
    dataset,
    tau_grid,
    lambda_: float = 0.0,
    repeats: int = 5,
    seed: int = 0,
    k_nn: int | None = None,
    loop_iter: int = 50,
    conv_thresh: float = 0.01,
) -> list[ExperimentRecord]:
    """Cluster embeddings across a truncation grid plus a raw baseline.

    For each tau the data is decomposed once (the solver is deterministic)
    and k-means runs `repeats` times with distinct seeds; the record holds
    the mean NMI against the dataset labels. A raw-tensor k-means record
    with the full storage footprint is appended last. Solver failures are
    logged and the sweep continues.
    """
    y = dataset.as_solver_input()
    labels = dataset.labels
    n_classes = dataset.n_classes
    graph = build_graph(dataset.samples, k_nn) if lambda_ > 0 else None

    records = []
    for tau in tau_grid:
        config = SolverConfig(
            lambda_=lambda_,
            tau=tau,
            loop_iter=loop_iter,
            conv_thresh=conv_thresh,
            seed=seed,
        )
        try:
            model, x, diag = run(y, config, graph)
        except SolverAbort as exc:
            log.warning("sweep cell tau=%g failed: %s", tau, exc)
            continue
        score = _mean_cluster_nmi(embedding_vectors(x), labels, n_classes, repeats, seed)
        records.append(
            ExperimentRecord(
                method="grtt",
                tau=float(tau),
                ranks=model.ranks,
                storage=storage_cost(model, x),
                nmi=score,
                time_s=diag.total_seconds,
                lambda_=lambda_,
                seed=seed,
            )
        )

    t0 = time.perf_counter()
    raw = dataset.samples.reshape(dataset.n_samples, -1)
    base_score = _mean_cluster_nmi(raw, labels, n_classes, repeats, seed)
    records.append(
        ExperimentRecord(
            method="raw-kmeans",
            tau=None,
            ranks=None,
            storage=int(dataset.samples.size),
            nmi=base_score,
            time_s=time.perf_counter() - t0,
            lambda_=None,
            seed=seed,
        )
    )
    return records


def lambda_scores(
    train,
    validation,
    lambda_grid=None,
    repeats: int = 5,
    seed: int = 0,
    tau: float = 0.7,
    k_nn: int | None = None,
    loop_iter: int = 50,
    conv_thresh: float = 0.01,
) -> list[tuple[float, float]]:
    """Mean validation NMI for each regularization weight.

    Train and validation samples are decomposed jointly (embeddings only
    exist for samples inside the fit); scoring clusters the validation
    members alone against their labels.
    """
    grid = sorted(DEFAULT_LAMBDA_GRID if lambda_grid is None else lambda_grid)
    samples = np.concatenate([train.samples, validation.samples], axis=0)
    y = np.moveaxis(samples, 0, -1)
    graph = build_graph(samples, k_nn)
    val_rows = slice(train.n_samples, None)
    val_labels = validation.labels
    n_classes = validation.n_classes

    scores = []
    for lam in grid:
        config = SolverConfig(
            lambda_=lam,
            tau=tau,
            loop_iter=loop_iter,
            conv_thresh=conv_thresh,
            seed=seed,
        )
        model, x, diag = run(y, config, graph)
        emb = embedding_vectors(x)[val_rows]
        score = _mean_cluster_nmi(emb, val_labels, n_classes, repeats, seed)
        scores.append((float(lam), score))
        log.info("lambda=%g validation nmi=%.4f (%.1fs)", lam, score, diag.total_seconds)
    return scores


def select_lambda(train, validation, lambda_grid=None, repeats: int = 5, **kwargs) -> float:
    """Weight with the best mean validation NMI; ties go to the smaller."""
    scores = lambda_scores(train, validation, lambda_grid, repeats, **kwargs)
    best_lam, best = scores[0]
    for lam, score in scores[1:]:
        if score > best:
            best_lam, best = lam, score
    return best_lam


def format_ranks(ranks) -> str:
    return "x".join(str(int(r)) for r in ranks)


def _fmt(value, digits: int = 6) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), f".{digits}g")


def write_records_csv(path, records) -> None:
    """One record per row under the fixed header; atomic write."""
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    r.method,
                    _fmt(r.tau),
                    "" if r.ranks is None else format_ranks(r.ranks),
                    str(int(r.storage)),
                    _fmt(r.nmi),
                    _fmt(r.time_s),
                    _fmt(r.lambda_),
                    str(int(r.seed)),
                ]
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_plot_companion(path, records) -> None:
    """Plot-ready (storage, nmi, time_s) rows sorted by storage."""
    lines = ["storage,nmi,time_s"]
    for r in sorted(records, key=lambda rec: rec.storage):
        lines.append(f"{int(r.storage)},{_fmt(r.nmi)},{_fmt(r.time_s)}")
    atomic_write_text(path, "\n".join(lines) + "\n")
