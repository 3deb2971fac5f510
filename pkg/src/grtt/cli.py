"""Command-line front end: ingest data, decompose, cluster, sweep, pick weights.

Every numeric option resolves in three steps: an explicit flag wins, then
a `key = value` line in the --config file, then the built-in default.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

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
    embedding_vectors,
    lambda_scores,
    nmi,
    kmeans,
    run_sweep,
    write_plot_companion,
    write_records_csv,
)
from .graph import build_graph
from .solver import SolverConfig, run
from .tt import load_model, save_model, storage_cost

__all__ = ["main"]

log = logging.getLogger(__name__)

DEFAULTS = {
    "tau": 0.7,
    "lambda_": 0.0,
    "gamma": None,
    "loop_iter": 50,
    "conv_thresh": 0.01,
    "k_nn": None,
    "seed": 0,
    "repeats": 5,
    "per_class": None,
    "val_per_class": 0,
}

CASTS = {
    "tau": float,
    "lambda_": float,
    "gamma": float,
    "loop_iter": int,
    "conv_thresh": float,
    "k_nn": int,
    "seed": int,
    "repeats": int,
    "per_class": int,
    "val_per_class": int,
    "reshape": str,
    "noise": float,
    "classes": int,
    "shape": str,
}


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(t) for t in text.split("x"))
    except ValueError:
        raise ValueError(f"cannot parse mode sizes from {text!r}") from None
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"mode sizes must be positive: {text!r}")
    return dims


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise ValueError(f"cannot parse number list from {text!r}") from None


def _read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line without '=': {raw.strip()!r}")
            key, val = line.split("=", 1)
            key = key.strip().replace("-", "_")
            if key == "lambda":
                key = "lambda_"
            out[key] = val.strip()
    return out


def _make_resolver(args, config: dict[str, str]):
    def get(name: str):
        val = getattr(args, name, None)
        if val is not None:
            return val
        if name in config:
            cast = CASTS.get(name, str)
            return cast(config[name])
        return DEFAULTS.get(name)

    return get


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="NPZ dataset with samples and labels arrays")
    p.add_argument("--images", help="IDX image file")
    p.add_argument("--labels", help="IDX label file")
    p.add_argument("--image-dir", help="folder of class_instance.pgm files")
    p.add_argument("--reshape", help="target mode sizes, e.g. 4x7x4x7")
    p.add_argument("--per-class", type=int, help="training samples kept per class")
    p.add_argument("--val-per-class", type=int, help="held-out samples per class")


def _add_solver_args(p: argparse.ArgumentParser, tau_is_grid: bool = False) -> None:
    if tau_is_grid:
        p.add_argument("--tau", help="comma-separated truncation grid, e.g. 0.9,0.7,0.5")
    else:
        p.add_argument("--tau", type=float, help="relative rank truncation in (0, 1]")
    p.add_argument("--lambda", dest="lambda_", type=float, help="graph smoothness weight")
    p.add_argument("--gamma", type=float, help="fixed penalty weight (default adaptive)")
    p.add_argument("--loop-iter", type=int, help="max sweeps (default 50)")
    p.add_argument("--conv-thresh", type=float, help="stopping threshold (default 0.01)")
    p.add_argument("--k-nn", type=int, help="graph neighbors (default round(ln S))")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--repeats", type=int, help="k-means restarts to average (default 5)")
    p.add_argument("--config", help="key = value option file, overridden by flags")


def _load_dataset(args, get) -> tuple[Dataset, Dataset | None]:
    reshape = getattr(args, "reshape", None)
    if reshape is None:
        reshape = get("reshape")
    target = _parse_dims(reshape) if reshape else None
    per_class = get("per_class")
    val_per_class = get("val_per_class")
    seed = get("seed")
    if args.data:
        dataset = load_npz_dataset(args.data)
        if per_class is None:
            return dataset, None
        return stratified_split(dataset, per_class, val_per_class, seed)
    if args.images and args.labels:
        spec = DatasetSpec("idx", target, per_class, val_per_class, seed)
        return ingest_idx(args.images, args.labels, spec)
    if args.image_dir:
        spec = DatasetSpec("image-dir", target, per_class, val_per_class, seed)
        return ingest_image_dir(args.image_dir, spec)
    raise ValueError("no dataset given: pass --data, --images/--labels, or --image-dir")


def _solver_config(get, tau=None) -> SolverConfig:
    return SolverConfig(
        lambda_=get("lambda_"),
        gamma=get("gamma"),
        loop_iter=get("loop_iter"),
        conv_thresh=get("conv_thresh"),
        tau=get("tau") if tau is None else tau,
        seed=get("seed"),
    )


def cmd_decompose(args) -> int:
    config_file = _read_config_file(args.config) if args.config else {}
    get = _make_resolver(args, config_file)
    train, _ = _load_dataset(args, get)
    y = train.as_solver_input()
    lam = get("lambda_")
    graph = build_graph(train.samples, get("k_nn")) if lam > 0 else None
    config = _solver_config(get)
    model, x, diag = run(y, config, graph, jsonl_path=args.diagnostics)
    save_model(args.out, model, x)
    status = "converged" if diag.converged else "iteration cap"
    print(
        f"wrote {args.out}: ranks={'x'.join(str(r) for r in model.ranks)} "
        f"storage={storage_cost(model, x)} sweeps={diag.sweeps} ({status}) "
        f"time={diag.total_seconds:.2f}s"
    )
    return 0


def cmd_cluster(args) -> int:
    config_file = _read_config_file(args.config) if args.config else {}
    get = _make_resolver(args, config_file)
    model, x = load_model(args.model)
    train, _ = _load_dataset(args, get)
    if train.n_samples != x.shape[1]:
        raise ValueError(
            f"model holds {x.shape[1]} embeddings but the dataset has {train.n_samples} samples"
        )
    emb = embedding_vectors(x)
    seed = get("seed")
    repeats = get("repeats")
    scores = [
        nmi(kmeans(emb, train.n_classes, seed=seed + j).assignments, train.labels)
        for j in range(repeats)
    ]
    for j, s in enumerate(scores):
        print(f"repeat {j}: nmi={s:.6f}")
    print(
        f"samples={train.n_samples} classes={train.n_classes} "
        f"storage={storage_cost(model, x)} nmi_mean={float(np.mean(scores)):.6f}"
    )
    return 0


def cmd_sweep(args) -> int:
    config_file = _read_config_file(args.config) if args.config else {}
    get = _make_resolver(args, config_file)
    tau_text = args.tau if args.tau is not None else config_file.get("tau")
    if not tau_text:
        raise ValueError("sweep needs --tau with a comma-separated grid")
    tau_grid = _parse_floats(str(tau_text))
    train, _ = _load_dataset(args, get)
    records = run_sweep(
        train,
        tau_grid,
        lambda_=get("lambda_"),
        repeats=get("repeats"),
        seed=get("seed"),
        k_nn=get("k_nn"),
        loop_iter=get("loop_iter"),
        conv_thresh=get("conv_thresh"),
    )
    write_records_csv(args.out, records)
    plot_path = _companion_path(args.out)
    write_plot_companion(plot_path, records)
    print(f"wrote {len(records)} records to {args.out} (plot data: {plot_path})")
    return 0


def _companion_path(out_path: str) -> str:
    if out_path.endswith(".csv"):
        return out_path[: -len(".csv")] + "_plot.csv"
    return out_path + "_plot.csv"


def cmd_select_lambda(args) -> int:
    config_file = _read_config_file(args.config) if args.config else {}
    get = _make_resolver(args, config_file)
    train, val = _load_dataset(args, get)
    if val is None or val.n_samples == 0:
        raise ValueError("select-lambda needs --val-per-class > 0 for a validation split")
    grid = _parse_floats(args.lambda_grid) if args.lambda_grid else None
    scores = lambda_scores(
        train,
        val,
        grid,
        repeats=get("repeats"),
        seed=get("seed"),
        tau=get("tau"),
        k_nn=get("k_nn"),
        loop_iter=get("loop_iter"),
        conv_thresh=get("conv_thresh"),
    )
    best_lam, best = scores[0]
    for lam, s in scores:
        print(f"lambda={lam:g} nmi={s:.6f}")
        if s > best:
            best_lam, best = lam, s
    print(f"selected lambda={best_lam:g}")
    return 0


def cmd_synth(args) -> int:
    config_file = _read_config_file(args.config) if args.config else {}
    get = _make_resolver(args, config_file)
    shape_text = args.shape if args.shape is not None else config_file.get("shape")
    if not shape_text:
        raise ValueError("synth needs --shape, e.g. 4x4x4")
    dataset = synth_clusters(
        get("classes") or 4,
        get("per_class") or 20,
        _parse_dims(str(shape_text)),
        noise_sigma=get("noise") if get("noise") is not None else 0.1,
        seed=get("seed"),
    )
    save_npz_dataset(args.out, dataset)
    print(
        f"wrote {args.out}: {dataset.n_samples} samples of shape "
        f"{'x'.join(str(d) for d in dataset.sample_shape)} in {dataset.n_classes} classes"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grtt",
        description="Graph-regularized tensor-train decomposition and clustering evaluation",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-sweep diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="fit a model and write the factor container")
    _add_dataset_args(p)
    _add_solver_args(p)
    p.add_argument("--diagnostics", help="write per-sweep JSON lines here")
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("cluster", help="k-means + NMI report for a fitted model")
    _add_dataset_args(p)
    _add_solver_args(p)
    p.add_argument("--model", required=True, help="model file from decompose")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("sweep", help="NMI/storage/time across a truncation grid")
    _add_dataset_args(p)
    _add_solver_args(p, tau_is_grid=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("select-lambda", help="pick the smoothness weight on a validation split")
    _add_dataset_args(p)
    _add_solver_args(p)
    p.add_argument("--lambda-grid", help="comma-separated weights (default 0.001..1000)")
    p.set_defaults(func=cmd_select_lambda)

    p = sub.add_parser("synth", help="generate a synthetic clustered dataset")
    p.add_argument("--classes", type=int, help="number of clusters (default 4)")
    p.add_argument("--per-class", type=int, help="samples per cluster (default 20)")
    p.add_argument("--shape", help="sample mode sizes, e.g. 4x4x4")
    p.add_argument("--noise", type=float, help="noise level (default 0.1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="key = value option file, overridden by flags")
    p.add_argument("--out", required=True, help="output NPZ path")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except Exception as exc:  # per-command validation and runtime failures
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
