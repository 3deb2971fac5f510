"""Dataset ingestion: IDX archives, PGM image folders, synthetic clusters.

Every loader returns samples with one tensor per leading index, pixel
values in [0, 1], and integer class labels. Images are refolded to the
requested mode sizes under the package-wide first-index-fastest layout.
"""

from __future__ import annotations

import io
import math
import os
import struct
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .fileio import atomic_write_bytes

__all__ = [
    "DatasetSpec",
    "Dataset",
    "stratified_split",
    "ingest_idx",
    "ingest_image_dir",
    "synth_clusters",
    "save_npz_dataset",
    "load_npz_dataset",
]

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


@dataclass
class DatasetSpec:
    """How to turn a raw source into solver-ready samples.

    reshape is the target mode-size tuple (its product must equal the
    source sample's pixel count, after any downsampling); per_class and
    val_per_class drive the stratified subset, per_class None meaning
    keep everything.
    """

    kind: str
    reshape: tuple[int, ...] | None = None
    per_class: int | None = None
    val_per_class: int = 0
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("idx", "image-dir", "synthetic"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.reshape is not None:
            self.reshape = tuple(int(d) for d in self.reshape)
            if any(d < 1 for d in self.reshape):
                raise ValueError("reshape entries must be positive")
        if self.per_class is not None and self.per_class < 1:
            raise ValueError("per_class must be positive")
        if self.val_per_class < 0:
            raise ValueError("val_per_class must be nonnegative")


@dataclass
class Dataset:
    """Samples with the sample mode first, plus integer labels."""

    samples: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        self.labels = np.asarray(self.labels)
        if self.samples.shape[0] != self.labels.shape[0]:
            raise ValueError("sample and label counts differ")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return self.samples.shape[1:]

    @property
    def n_classes(self) -> int:
        return int(np.unique(self.labels).size)

    def as_solver_input(self) -> np.ndarray:
        """Sample mode moved to the end: (I_1, ..., I_N, S)."""
        return np.moveaxis(self.samples, 0, -1)


def stratified_split(dataset: Dataset, per_class: int, val_per_class: int = 0, seed=None):
    """Seed-deterministic per-class subset, with an optional held-out split.

    Returns (train, validation); validation is None when val_per_class
    is 0. Indices are drawn without replacement per class and kept in
    source order.
    """
    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    val_idx: list[int] = []
    need = per_class + val_per_class
    for cls in np.unique(dataset.labels):
        pool = np.flatnonzero(dataset.labels == cls)
        if pool.size < need:
            raise ValueError(f"class {cls!r} has {pool.size} samples, need {need}")
        pick = rng.permutation(pool)[:need]
        train_idx.extend(pick[:per_class].tolist())
        val_idx.extend(pick[per_class:].tolist())
    train_idx = np.sort(np.asarray(train_idx, dtype=int))
    train = Dataset(dataset.samples[train_idx], dataset.labels[train_idx])
    if val_per_class == 0:
        return train, None
    val_idx = np.sort(np.asarray(val_idx, dtype=int))
    return train, Dataset(dataset.samples[val_idx], dataset.labels[val_idx])


def _maybe_split(dataset: Dataset, spec: DatasetSpec):
    if spec.per_class is None:
        return dataset, None
    return stratified_split(dataset, spec.per_class, spec.val_per_class, spec.seed)


def _read_idx_images(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise ValueError("truncated IDX image header")
    magic, count, rows, cols = struct.unpack_from(">4I", data, 0)
    if magic != IDX_IMAGE_MAGIC:
        raise ValueError(f"bad IDX image magic {magic}, expected {IDX_IMAGE_MAGIC}")
    if len(data) < 16 + count * rows * cols:
        raise ValueError("truncated IDX image payload")
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=16)
    return pixels.reshape(count, rows, cols)


def _read_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 8:
        raise ValueError("truncated IDX label header")
    magic, count = struct.unpack_from(">2I", data, 0)
    if magic != IDX_LABEL_MAGIC:
        raise ValueError(f"bad IDX label magic {magic}, expected {IDX_LABEL_MAGIC}")
    if len(data) < 8 + count:
        raise ValueError("truncated IDX label payload")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8).astype(int)


def ingest_idx(images_path, labels_path, spec: DatasetSpec):
    """Load an IDX image/label pair into (train, validation) datasets.

    Pixels are scaled to [0, 1] and every image refolded to spec.reshape
    with the first index fastest. The stratified subset policy of the
    spec is applied after loading; validation is None when no held-out
    samples are requested.
    """
    images = _read_idx_images(images_path)
    labels = _read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"image count {images.shape[0]} does not match label count {labels.shape[0]}"
        )
    target = spec.reshape if spec.reshape is not None else images.shape[1:]
    if math.prod(target) != images.shape[1] * images.shape[2]:
        raise ValueError(
            f"reshape target {target} incompatible with {images.shape[1]}x{images.shape[2]} images"
        )
    arr = images.astype(float) / 255.0
    samples = np.stack([img.reshape(target, order="F") for img in arr])
    return _maybe_split(Dataset(samples, labels), spec)


def _read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise ValueError(f"{path}: truncated PGM header")
        ch = data[i : i + 1]
        if ch in b" \t\r\n":
            i += 1
        elif ch == b"#":
            j = data.find(b"\n", i)
            if j < 0:
                raise ValueError(f"{path}: unterminated PGM comment")
            i = j + 1
        else:
            j = i
            while j < len(data) and data[j : j + 1] not in b" \t\r\n#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary (P5) PGM file")
    width, height, maxval = (int(t) for t in tokens[1:])
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PGM supported, maxval {maxval}")
    start = i + 1  # single whitespace byte separates header from raster
    if len(data) < start + width * height:
        raise ValueError(f"{path}: truncated PGM raster")
    img = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=start)
    return img.reshape(height, width), maxval


def _block_average(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    if h % 2 or w % 2:
        raise ValueError("block averaging needs even image dimensions")
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def ingest_image_dir(path, spec: DatasetSpec):
    """Load a folder of class_instance.pgm files into datasets.

    Class names are the filename part before the last underscore, mapped
    to label ids in sorted order. Images whose pixel count is four times
    the reshape target are downsampled once by 2x2 block averaging.
    """
    names = sorted(f for f in os.listdir(path) if f.endswith(".pgm"))
    if not names:
        raise ValueError(f"no .pgm files in {path}")
    if spec.reshape is None:
        raise ValueError("image-dir ingestion needs an explicit reshape target")
    target = spec.reshape
    total = math.prod(target)
    class_of = {}
    samples = []
    tags = []
    for name in names:
        stem = name[: -len(".pgm")]
        cls = stem.rsplit("_", 1)[0]
        img, maxval = _read_pgm(os.path.join(path, name))
        arr = img.astype(float) / maxval
        if arr.size == 4 * total:
            arr = _block_average(arr)
        if arr.size != total:
            raise ValueError(
                f"{name}: {img.shape[0]}x{img.shape[1]} pixels incompatible with target {target}"
            )
        samples.append(arr.reshape(target, order="F"))
        tags.append(cls)
    class_of = {c: i for i, c in enumerate(sorted(set(tags)))}
    labels = np.array([class_of[t] for t in tags], dtype=int)
    return _maybe_split(Dataset(np.stack(samples), labels), spec)


def synth_clusters(n_classes: int, per_class: int, shape, noise_sigma: float = 0.1, seed=None) -> Dataset:
    """Gaussian clusters around random rank-1 prototype tensors.

    Each class prototype is an outer product of unit vectors (unit
    Frobenius norm); samples add i.i.d. noise of the given level.
    Deterministic under seed.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    shape = tuple(int(d) for d in shape)
    rng = np.random.default_rng(seed)
    prototypes = []
    for _ in range(n_classes):
        axes = []
        for dim in shape:
            v = rng.standard_normal(dim)
            axes.append(v / np.linalg.norm(v))
        prototypes.append(reduce(np.multiply.outer, axes))
    samples = np.empty((n_classes * per_class,) + shape)
    for c in range(n_classes):
        for j in range(per_class):
            noise = rng.standard_normal(shape) if noise_sigma > 0 else 0.0
            samples[c * per_class + j] = prototypes[c] + noise_sigma * noise
    labels = np.repeat(np.arange(n_classes), per_class)
    return Dataset(samples, labels)


def save_npz_dataset(path, dataset: Dataset) -> None:
    """Atomic NPZ dump of samples and labels."""
    buf = io.BytesIO()
    np.savez(buf, samples=dataset.samples, labels=dataset.labels)
    atomic_write_bytes(path, buf.getvalue())


def load_npz_dataset(path) -> Dataset:
    with np.load(path) as npz:
        return Dataset(npz["samples"], npz["labels"])
