"""Shared fixtures and generators for the test suite."""

import os
import struct
from pathlib import Path

import numpy as np
import pytest

from grtt import TTModel, permute_sample_mode, reconstruct


def make_orthogonal_tt(shape, ranks, n_samples, split_index, seed=0, x_scale=1.0):
    """Build an exact TT instance from random orthogonal factors.

    Parameters
    ----------
    shape : tuple of int
        Data mode sizes (I_1, ..., I_N), sample mode excluded.
    ranks : tuple of int
        Interior ranks (r_1, ..., r_N); boundaries are fixed at 1.
    n_samples : int
        Number of samples S.
    split_index : int
        k, the number of factors left of the sample core.
    seed : int
        RNG seed.
    x_scale : float
        Standard deviation of the sample-core entries.

    Returns
    -------
    model : TTModel
        Factors with exact left/right orthogonality, flags set.
    x : ndarray
        Sample core of shape (r_k, S, r_{k+1}).
    y : ndarray
        Dense data tensor with the sample mode last.
    """
    shape = tuple(int(s) for s in shape)
    ranks = tuple(int(r) for r in ranks)
    k = split_index
    n = len(shape)
    if len(ranks) != n:
        raise ValueError("need one interior rank per data mode")
    chain = (1,) + ranks + (1,)
    rng = np.random.default_rng(seed)
    factors = []
    for i in range(k):
        r_in, r_out = chain[i], chain[i + 1]
        if r_in * shape[i] < r_out:
            raise ValueError(f"rank {r_out} too large for left factor {i}")
        q, _ = np.linalg.qr(rng.standard_normal((r_in * shape[i], r_out)))
        factors.append(q.reshape((r_in, shape[i], r_out), order="F"))
    for i in range(k, n):
        r_in, r_out = chain[i + 1], chain[i + 2]
        if shape[i] * r_out < r_in:
            raise ValueError(f"rank {r_in} too large for right factor {i}")
        q, _ = np.linalg.qr(rng.standard_normal((shape[i] * r_out, r_in)))
        factors.append(np.ascontiguousarray(q.T).reshape((r_in, shape[i], r_out), order="F"))
    model = TTModel(factors, k)
    model.refresh_orth_flags()
    assert all(flag is not None for flag in model.orth), "generator produced non-orthogonal factors"
    x = x_scale * rng.standard_normal((chain[k], n_samples, chain[k + 1]))
    y_mid = reconstruct(model, x)
    y = permute_sample_mode(y_mid, k, "to-last")
    return model, x, y


def write_idx_pair(dirpath, pixels, labels):
    """Write uint8 images (N, H, W) and labels (N,) as an IDX file pair."""
    dirpath = Path(dirpath)
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    n, h, w = pixels.shape
    images_path = dirpath / "images.idx"
    labels_path = dirpath / "labels.idx"
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", 2051, n, h, w))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", 2049, n))
        f.write(labels.tobytes())
    return images_path, labels_path


def _surrogate_digits_28x28():
    """Upsample the bundled 8x8 digit scans to 28x28 grayscale images.

    Nearest-neighbour 7x replication followed by 2x2 block averaging keeps
    the construction dependency-free and deterministic. The result matches
    the handwritten-digit geometry (28x28, 10 classes, >= 55 per class)
    and stands in when no real corpus is available locally.
    """
    from sklearn.datasets import load_digits

    bundle = load_digits()
    imgs8 = bundle.images / 16.0
    up = np.repeat(np.repeat(imgs8, 7, axis=1), 7, axis=2)
    imgs28 = up.reshape(-1, 28, 2, 28, 2).mean(axis=(2, 4))
    pixels = np.clip(np.round(imgs28 * 255.0), 0, 255).astype(np.uint8)
    return pixels, bundle.target.astype(np.uint8)


@pytest.fixture(scope="session")
def digit_idx_files(tmp_path_factory):
    """IDX file pair with 28x28 digit images and labels.

    Honours the GRTT_MNIST_DIR environment variable: when it names a
    directory holding a recognized IDX pair, the real files are used.
    Otherwise a surrogate corpus is synthesized from the bundled 8x8
    digit scans (see _surrogate_digits_28x28).
    """
    override = os.environ.get("GRTT_MNIST_DIR")
    if override:
        root = Path(override)
        candidates = (
            ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            ("train-images.idx3-ubyte", "train-labels.idx1-ubyte"),
            ("images.idx", "labels.idx"),
        )
        for img_name, lab_name in candidates:
            img, lab = root / img_name, root / lab_name
            if img.exists() and lab.exists():
                return {"images": img, "labels": lab, "source": "mnist"}
        raise RuntimeError(f"GRTT_MNIST_DIR={override} holds no recognized IDX pair")
    pixels, labels = _surrogate_digits_28x28()
    out = tmp_path_factory.mktemp("digit_idx")
    images_path, labels_path = write_idx_pair(out, pixels, labels)
    return {"images": images_path, "labels": labels_path, "source": "digits-surrogate"}
