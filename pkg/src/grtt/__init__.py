"""Graph-regularized tensor-train decomposition with clustering evaluation.

The package factorizes a stack of sample tensors into shared orthogonal
train factors around per-sample embedding matrices, optionally smoothing
the embeddings along a k-NN sample graph, and ships the harness used to
score the embeddings by clustering quality against storage and time.
"""

from .datasets import (
    Dataset,
    DatasetSpec,
    ingest_idx,
    ingest_image_dir,
    load_npz_dataset,
    save_npz_dataset,
    stratified_split,
    synth_clusters,
)
from .evaluation import (
    ClusterResult,
    ExperimentRecord,
    embedding_vectors,
    kmeans,
    lambda_scores,
    nmi,
    run_sweep,
    select_lambda,
    write_plot_companion,
    write_records_csv,
)
from .graph import (
    GraphLaplacian,
    build_graph,
    default_knn,
    graph_quadratic,
    knn_adjacency,
    save_edge_list,
)
from .linalg import (
    RankDeficiencyWarning,
    SingularPairError,
    SymEigPair,
    kron_ridge_solve,
    nearest_orthogonal,
    spectral_norm,
    sylvester_sym_solve,
    sym_eig,
)
from .solver import (
    NormalEquationOperands,
    SolverAbort,
    SolverConfig,
    SolverDiagnostics,
    SolverState,
    build_operands,
    convergence_metric,
    objective,
    run,
    stationarity_residual,
    update_u,
    update_v,
    update_x,
    update_z,
)
from .tensor_ops import (
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
from .tt import (
    TTModel,
    contract_boundary,
    load_model,
    reconstruct,
    save_model,
    select_split_index,
    storage_cost,
    tt_svd,
)

__version__ = "0.1.0"
