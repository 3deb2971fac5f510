"""Alternating solver for graph-regularized tensor-train decomposition.

Each sweep visits every factor once: the working factor V_n is refit by
regularized least squares, its orthogonal counterpart U_n by a Procrustes
projection, the dual Z_n by a gradient step; the sample embeddings X are
then refit once via a Sylvester solve. The data tensor is held with the
sample mode at position k+1 throughout (first-index-fastest layout).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphLaplacian, graph_quadratic
from .linalg import (
    SingularPairError,
    SymEigPair,
    kron_ridge_solve,
    nearest_orthogonal,
    spectral_norm,
    sym_eig,
    sylvester_sym_solve,
)
from .tensor_ops import (
    chain_merge,
    fold_left,
    fold_right,
    frobenius_norm,
    left_unfold,
    permute_sample_mode,
    reshape_tn,
    right_unfold,
    vec,
)
from .tt import TTModel, reconstruct, select_split_index, tt_svd

__all__ = [
    "SolverConfig",
    "SolverState",
    "SolverDiagnostics",
    "SolverAbort",
    "NormalEquationOperands",
    "objective",
    "build_operands",
    "update_v",
    "update_u",
    "update_z",
    "update_x",
    "stationarity_residual",
    "convergence_metric",
    "run",
]

log = logging.getLogger(__name__)

STATIONARITY_RTOL = 1e-6


@dataclass
class SolverConfig:
    """Solver hyperparameters.

    lambda_ weights the graph smoothness term; gamma is the penalty
    weight (None selects it adaptively per mode and sweep); loop_iter
    caps the sweep count and conv_thresh stops early on small relative
    factor change. tau (or explicit ranks) controls the initialization
    truncation; split_index overrides the balanced default.
    """

    lambda_: float = 0.0
    gamma: float | None = None
    loop_iter: int = 50
    conv_thresh: float = 0.01
    tau: float = 0.5
    ranks: tuple[int, ...] | None = None
    split_index: int | None = None
    seed: int | None = None
    check_stationarity: bool = False

    def __post_init__(self):
        if self.lambda_ < 0:
            raise ValueError("lambda_ must be nonnegative")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive when fixed")
        if self.loop_iter < 1:
            raise ValueError("loop_iter must be at least 1")
        if self.conv_thresh <= 0:
            raise ValueError("conv_thresh must be positive")


@dataclass
class SolverState:
    """Working variables of a run; factor lists are aliased, not copied."""

    split_index: int
    u_factors: list[np.ndarray]
    v_factors: list[np.ndarray]
    duals: list[np.ndarray]
    embedding: np.ndarray
    iteration: int = 0
    conv_metric: float = float("inf")
    objective_trace: list[float] = field(default_factory=list)

    @property
    def order(self) -> int:
        return len(self.v_factors)


@dataclass
class NormalEquationOperands:
    """Dense H, P, G of one mode's least-squares subproblem.

    The unknown factor enters through its left unfolding for modes left
    of the split and its right unfolding otherwise; in either case
    H @ unfolding @ P is conformable with G.
    """

    h: np.ndarray
    p: np.ndarray
    g: np.ndarray


@dataclass
class SolverDiagnostics:
    sweeps: int
    converged: bool
    conv_trace: list[float]
    objective_trace: list[float]
    gamma_trace: list[list[float]]
    phase_seconds: dict[str, float]
    total_seconds: float


class SolverAbort(RuntimeError):
    """A kernel failed mid-run; .state snapshots the solver at failure."""

    def __init__(self, message: str, state: SolverState):
        super().__init__(message)
        self.state = state


def _unfold(core: np.ndarray, mode: int, split: int) -> np.ndarray:
    return left_unfold(core) if mode < split else right_unfold(core)


def _fold(m: np.ndarray, shape, mode: int, split: int) -> np.ndarray:
    return fold_left(m, shape) if mode < split else fold_right(m, shape)


def objective(factors, split_index, embedding, y_permuted, graph=None, lambda_=0.0):
    """Squared reconstruction error plus the weighted smoothness penalty.

    Evaluated with whichever factor set the caller passes (working or
    orthogonal); `y_permuted` carries the sample mode at the split.
    """
    model = TTModel(factors=list(factors), split_index=split_index)
    diff = reconstruct(model, embedding) - y_permuted
    value = float(np.sum(diff * diff))
    if graph is not None and lambda_ != 0.0:
        value += lambda_ * graph_quadratic(embedding, graph)
    return value


def build_operands(state: SolverState, y_permuted: np.ndarray, mode: int) -> NormalEquationOperands:
    """Assemble H, P, G for one factor's subproblem (0-based mode).

    Left of the split H carries an identity block per data index of the
    mode and P is the right-unfolded contraction of everything to the
    right (embedding included); right of the split the identity block
    moves into P and H is the left-unfolded contraction of everything to
    the left. Always uses the most recently updated value of every other
    variable.
    """
    n, k = mode, state.split_index
    order = state.order
    if not 0 <= n < order:
        raise ValueError(f"mode {n} out of range for order {order}")
    v = state.v_factors
    i_n = v[n].shape[1]
    if n < k:
        la = np.ones((1, 1)) if n == 0 else left_unfold(chain_merge(v[:n]))
        h = np.kron(np.eye(i_n), la)
        p = right_unfold(chain_merge(v[n + 1 : k] + [state.embedding] + v[k:]))
    else:
        h = left_unfold(chain_merge(v[:k] + [state.embedding] + v[k:n]))
        rb = np.ones((1, 1)) if n == order - 1 else right_unfold(chain_merge(v[n + 1 :]))
        p = np.kron(rb, np.eye(i_n))
    g = reshape_tn(y_permuted, n + 1)
    return NormalEquationOperands(h=h, p=p, g=g)


def update_v(state: SolverState, mode: int, operands: NormalEquationOperands, gamma: float) -> np.ndarray:
    """Refit one working factor by penalized least squares.

    Solves 2 H'H M PP' + gamma M = 2 H'G P' + gamma U + Z in the joint
    eigenbasis and refolds M to the factor's shape.
    """
    n, k = mode, state.split_index
    shape = state.v_factors[n].shape
    uu = _unfold(state.u_factors[n], n, k)
    zz = _unfold(state.duals[n], n, k)
    h, p, g = operands.h, operands.p, operands.g
    a = h.T @ h
    b = p @ p.T
    rhs = 2.0 * (h.T @ g @ p.T) + gamma * uu + zz
    m = kron_ridge_solve(a, b, gamma, vec(rhs)).reshape(uu.shape, order="F")
    return _fold(m, shape, n, k)


def stationarity_residual(state: SolverState, mode: int, operands: NormalEquationOperands, gamma: float):
    """Residual of the mode's normal equations at the current V_n.

    Returns (residual, bound); a correct factor update leaves the
    residual far below the bound. Must be called before U_n and Z_n are
    advanced past the values the V solve used.
    """
    n, k = mode, state.split_index
    vv = _unfold(state.v_factors[n], n, k)
    uu = _unfold(state.u_factors[n], n, k)
    zz = _unfold(state.duals[n], n, k)
    h, p, g = operands.h, operands.p, operands.g
    r = 2.0 * (h.T @ (h @ vv @ p - g) @ p.T) - zz + gamma * (vv - uu)
    bound = STATIONARITY_RTOL * (frobenius_norm(g) + gamma * frobenius_norm(uu))
    return frobenius_norm(r), bound


def update_u(state: SolverState, mode: int, gamma: float) -> np.ndarray:
    """Project V_n - Z_n/gamma onto the orthogonal factors.

    Left of the split the left unfolding gets orthonormal columns; right
    of the split the right unfolding gets orthonormal rows.
    """
    n, k = mode, state.split_index
    shape = state.v_factors[n].shape
    target = _unfold(state.v_factors[n], n, k) - _unfold(state.duals[n], n, k) / gamma
    if n < k:
        q = nearest_orthogonal(target)
    else:
        q = nearest_orthogonal(target.T).T
    return _fold(q, shape, n, k)


def update_z(state: SolverState, mode: int, gamma: float) -> np.ndarray:
    """Dual gradient step Z_n - gamma (V_n - U_n)."""
    n = mode
    return state.duals[n] - gamma * (state.v_factors[n] - state.u_factors[n])


def update_x(
    state: SolverState,
    y_permuted: np.ndarray,
    graph: GraphLaplacian | None = None,
    lambda_: float = 0.0,
    lap_eig: SymEigPair | None = None,
) -> np.ndarray:
    """Refit the sample embeddings given the current working factors.

    Solves A M + M (lambda L) = C where A is the Kronecker product of
    the two boundary Gram matrices, M holds one vec'd embedding per
    column and C the matching projected data. A singular pair (both
    Gram and Laplacian null spaces hit) is retried once with a small
    ridge proportional to the mean eigenvalue.
    """
    k = state.split_index
    v = state.v_factors
    la = left_unfold(chain_merge(v[:k]))
    rb = right_unfold(chain_merge(v[k:]))
    r_left, r_right = la.shape[1], rb.shape[0]
    ea = sym_eig(la.T @ la)
    eb = sym_eig(rb @ rb.T)
    a = SymEigPair(np.kron(eb.eigenvalues, ea.eigenvalues), np.kron(eb.eigenvectors, ea.eigenvectors))

    y_last = permute_sample_mode(y_permuted, k, "to-last")
    n_samples = y_last.shape[-1]
    slabs = reshape_tn(y_last, y_last.ndim - 1).reshape(
        (la.shape[0], rb.shape[1], n_samples), order="F"
    )
    c3 = np.einsum("ua,uws,bw->abs", la, slabs, rb, optimize=True)
    c = c3.reshape((r_left * r_right, n_samples), order="F")

    if graph is not None and lambda_ != 0.0:
        if lap_eig is None:
            lap_eig = sym_eig(np.asarray(graph.laplacian, dtype=float))
        b = SymEigPair(lambda_ * lap_eig.eigenvalues, lap_eig.eigenvectors)
    else:
        b = SymEigPair(np.zeros(n_samples), np.eye(n_samples))

    try:
        m = sylvester_sym_solve(a, b, c)
    except SingularPairError:
        ridge = 1e-10 * (float(a.eigenvalues.mean()) + float(b.eigenvalues.mean()))
        if ridge <= 0.0:
            ridge = 1e-10
        log.warning("singular operand pair in embedding update; retrying with ridge %.3e", ridge)
        m = sylvester_sym_solve(a, b, c, ridge=ridge)
    x = m.reshape((r_left, r_right, n_samples), order="F")
    return np.moveaxis(x, 2, 1)


def convergence_metric(previous_factors, current_factors) -> float:
    """Mean relative squared factor change between consecutive sweeps.

    A mode whose previous factor had zero norm contributes 0 when it is
    unchanged and 1 otherwise.
    """
    terms = []
    for prev, cur in zip(previous_factors, current_factors, strict=True):
        denom = float(np.sum(prev * prev))
        diff = float(np.sum((cur - prev) ** 2))
        if denom == 0.0:
            terms.append(0.0 if diff == 0.0 else 1.0)
        else:
            terms.append(diff / denom)
    return sum(terms) / len(terms)


def _gamma_for(operands: NormalEquationOperands, config: SolverConfig) -> float:
    if config.gamma is not None:
        return config.gamma
    h, p = operands.h, operands.p
    return 2.0 * spectral_norm(p @ p.T) * spectral_norm(h.T @ h) + 1.0


def run(
    y: np.ndarray,
    config: SolverConfig,
    graph: GraphLaplacian | None = None,
    jsonl_path=None,
):
    """Decompose a sample-mode-last data tensor.

    Parameters
    ----------
    y : ndarray
        (I_1, ..., I_N, S): one sample per trailing index.
    config : SolverConfig
    graph : GraphLaplacian, optional
        Required when config.lambda_ > 0.
    jsonl_path : path, optional
        Per-sweep diagnostics as JSON lines, one object per sweep.

    Returns
    -------
    (TTModel, ndarray, SolverDiagnostics)
        The orthogonal factor set, the (r_k, S, r_{k+1}) embeddings, and
        run statistics. Any kernel failure raises SolverAbort carrying
        the state at failure.
    """
    t_start = time.perf_counter()
    y = np.asarray(y, dtype=float)
    if y.ndim < 3:
        raise ValueError("need at least two data modes plus the trailing sample mode")
    if config.lambda_ > 0 and graph is None:
        raise ValueError("a positive lambda_ requires a graph")
    data_shape = y.shape[:-1]
    k = config.split_index if config.split_index is not None else select_split_index(data_shape)
    yp = permute_sample_mode(y, k, "to-middle")

    init_model, x0 = tt_svd(yp, k, config.tau, config.ranks)
    u = [f.copy() for f in init_model.factors]
    v = [f.copy() for f in u]
    z = [np.zeros_like(f) for f in u]
    state = SolverState(split_index=k, u_factors=u, v_factors=v, duals=z, embedding=x0)
    order = state.order

    lap_eig = None
    if graph is not None and config.lambda_ > 0:
        lap_eig = sym_eig(np.asarray(graph.laplacian, dtype=float))

    rng = np.random.default_rng(config.seed)
    phase = {"operands": 0.0, "v": 0.0, "u": 0.0, "z": 0.0, "x": 0.0, "objective": 0.0}
    conv_trace: list[float] = []
    gamma_trace: list[list[float]] = []
    converged = False
    sweeps_done = 0

    out = open(jsonl_path, "w") if jsonl_path is not None else None
    try:
        for t in range(1, config.loop_iter + 1):
            sweep_phase = dict.fromkeys(phase, 0.0)
            prev_v = [f.copy() for f in v]
            gammas = []
            if config.check_stationarity:
                check = set(rng.choice(order, size=min(3, order), replace=False).tolist())
            else:
                check = set()
            try:
                for n in range(order):
                    t0 = time.perf_counter()
                    ops = build_operands(state, yp, n)
                    t1 = time.perf_counter()
                    sweep_phase["operands"] += t1 - t0
                    gamma = _gamma_for(ops, config)
                    gammas.append(gamma)
                    v[n] = update_v(state, n, ops, gamma)
                    t2 = time.perf_counter()
                    sweep_phase["v"] += t2 - t1
                    if n in check:
                        resid, bound = stationarity_residual(state, n, ops, gamma)
                        if resid > bound:
                            raise RuntimeError(
                                f"stationarity residual {resid:.3e} exceeds bound {bound:.3e} at mode {n}"
                            )
                    t3 = time.perf_counter()
                    u[n] = update_u(state, n, gamma)
                    t4 = time.perf_counter()
                    sweep_phase["u"] += t4 - t3
                    z[n] = update_z(state, n, gamma)
                    sweep_phase["z"] += time.perf_counter() - t4
                t5 = time.perf_counter()
                state.embedding = update_x(state, yp, graph, config.lambda_, lap_eig)
                t6 = time.perf_counter()
                sweep_phase["x"] += t6 - t5
                c = convergence_metric(prev_v, v)
                f_val = objective(u, k, state.embedding, yp, graph, config.lambda_)
                sweep_phase["objective"] += time.perf_counter() - t6
            except Exception as exc:
                raise SolverAbort(f"sweep {t} failed: {exc}", state) from exc

            state.iteration = t
            state.conv_metric = c
            state.objective_trace.append(f_val)
            conv_trace.append(c)
            gamma_trace.append(gammas)
            for key, val in sweep_phase.items():
                phase[key] += val
            sweeps_done = t
            log.info(
                "sweep %d: c=%.4e f=%.6e times ops=%.3f v=%.3f u=%.3f z=%.3f x=%.3f",
                t, c, f_val,
                sweep_phase["operands"], sweep_phase["v"], sweep_phase["u"],
                sweep_phase["z"], sweep_phase["x"],
            )
            if out is not None:
                out.write(
                    json.dumps(
                        {
                            "sweep": t,
                            "conv_metric": c,
                            "objective": f_val,
                            "gammas": gammas,
                            "phase_seconds": sweep_phase,
                        }
                    )
                    + "\n"
                )
            if c <= config.conv_thresh:
                converged = True
                break
    finally:
        if out is not None:
            out.close()

    model = TTModel(factors=[f.copy() for f in u], split_index=k)
    model.refresh_orth_flags()
    diag = SolverDiagnostics(
        sweeps=sweeps_done,
        converged=converged,
        conv_trace=conv_trace,
        objective_trace=list(state.objective_trace),
        gamma_trace=gamma_trace,
        phase_seconds=phase,
        total_seconds=time.perf_counter() - t_start,
    )
    return model, state.embedding, diag
