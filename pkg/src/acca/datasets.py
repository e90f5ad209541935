"""Multi-view datasets: the synthetic toy set, MNIST IDX ingestion and view transforms."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class MultiViewDataset:
    X: np.ndarray
    Y: np.ndarray
    labels: np.ndarray | None = None
    split: str = "train"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y, dtype=np.float64)
        if self.X.ndim != 2 or self.Y.ndim != 2:
            raise DataError(f"views must be 2-D, got {self.X.shape} and {self.Y.shape}")
        if self.X.shape[0] != self.Y.shape[0]:
            raise DataError(f"views are not paired: {self.X.shape[0]} vs {self.Y.shape[0]} rows")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.X.shape[0],):
                raise DataError(f"labels length {self.labels.shape} != {self.X.shape[0]} rows")

    def __len__(self):
        return self.X.shape[0]

    def subset(self, idx) -> "MultiViewDataset":
        idx = np.asarray(idx)
        lab = None if self.labels is None else self.labels[idx]
        return MultiViewDataset(self.X[idx], self.Y[idx], lab, self.split)


@dataclass(frozen=True)
class GmmSpec:
    """Scalar Gaussian mixture as (weight, mean, stddev) triples."""

    components: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        comps = tuple(tuple(float(v) for v in c) for c in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise DataError("mixture needs at least one component")
        for w, _, s in comps:
            if w < 0:
                raise DataError(f"negative mixture weight {w}")
            if s <= 0:
                raise DataError(f"mixture stddev must be positive, got {s}")
        total = sum(c[0] for c in comps)
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"mixture weights sum to {total}, not 1")

    @property
    def weights(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    @property
    def stds(self) -> np.ndarray:
        return np.array([c[2] for c in self.components])

    def mean(self) -> float:
        return float(self.weights @ self.means)

    def variance(self) -> float:
        w, m, s = self.weights, self.means, self.stds
        return float(w @ (s**2 + m**2) - self.mean() ** 2)


# 0.2 N(0, 1) + 0.5 N(8, 2) + 0.3 N(3, 1.5); second entries are stddevs
TOY_MIXTURE = GmmSpec(((0.2, 0.0, 1.0), (0.5, 8.0, 2.0), (0.3, 3.0, 1.5)))


def sample_gmm(spec: GmmSpec, n: int, dim: int, seed) -> np.ndarray:
    """Draw an n x dim matrix whose entries are i.i.d. from the scalar mixture."""
    if n < 1 or dim < 1:
        raise DataError(f"n and dim must be >= 1, got {n}, {dim}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    comp = rng.choice(len(spec.components), size=(n, dim), p=spec.weights)
    noise = rng.standard_normal((n, dim))
    return spec.means[comp] + spec.stds[comp] * noise


@dataclass
class ToyProjections:
    W1: np.ndarray
    W2: np.ndarray
    seed: int | None = None

    @classmethod
    def from_seed(cls, seed: int, latent_dim: int = 10, view_dim: int = 50) -> "ToyProjections":
        rng = np.random.default_rng(seed)
        W1 = rng.standard_normal((latent_dim, view_dim))
        W2 = rng.standard_normal((latent_dim, view_dim))
        return cls(W1, W2, seed)

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.W1, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.W2, dtype="<f8").tobytes())
        return h.hexdigest()


def _toy_views(z: np.ndarray, proj: ToyProjections) -> tuple[np.ndarray, np.ndarray]:
    return z @ proj.W1, (z * z) @ proj.W2


def make_toy(
    n_train: int,
    n_test: int,
    spec: GmmSpec = TOY_MIXTURE,
    proj: ToyProjections | None = None,
    seed: int = 0,
    return_latent: bool = False,
):
    """Toy pair with X = W1^T z and Y = W2^T (z*z), z drawn per-coordinate from ``spec``."""
    if n_train < 1 or n_test < 1:
        raise DataError(f"split sizes must be >= 1, got {n_train}/{n_test}")
    if proj is None:
        proj = ToyProjections.from_seed(seed)
    latent_dim = proj.W1.shape[0]
    if proj.W2.shape[0] != latent_dim:
        raise DataError(f"projection latent dims differ: {proj.W1.shape} vs {proj.W2.shape}")
    z = sample_gmm(spec, n_train + n_test, latent_dim, seed)
    X, Y = _toy_views(z, proj)
    train = MultiViewDataset(X[:n_train], Y[:n_train], split="train")
    test = MultiViewDataset(X[n_train:], Y[n_train:], split="test")
    if return_latent:
        return train, test, z[:n_train], z[n_train:]
    return train, test


@dataclass
class Standardizer:
    """Per-column z-scoring fitted on a training split."""

    mean_x: np.ndarray
    std_x: np.ndarray
    mean_y: np.ndarray
    std_y: np.ndarray

    @classmethod
    def fit(cls, data: MultiViewDataset) -> "Standardizer":
        def stats(a):
            s = a.std(axis=0)
            return a.mean(axis=0), np.where(s > 0, s, 1.0)

        mx, sx = stats(data.X)
        my, sy = stats(data.Y)
        return cls(mx, sx, my, sy)

    def transform(self, data: MultiViewDataset) -> MultiViewDataset:
        return MultiViewDataset(
            (data.X - self.mean_x) / self.std_x,
            (data.Y - self.mean_y) / self.std_y,
            data.labels,
            data.split,
        )


# ----------------------------------------------------------------------- IDX

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _read_idx(path: str | os.PathLike, magic: int, ndim: int) -> np.ndarray:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise DataError(f"missing IDX file: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise DataError(f"{path}: truncated at byte offset {len(raw)} while reading magic number")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise DataError(f"{path}: bad magic number at byte offset 0: expected 0x{magic:08x}, got 0x{found:08x}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise DataError(f"{path}: truncated at byte offset {len(raw)} while reading dimensions")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    n = int(np.prod(dims, dtype=np.int64))
    if len(raw) < header + n:
        raise DataError(f"{path}: truncated at byte offset {len(raw)}, expected {header + n} bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=n, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Read an IDX image/label pair; pixels are scaled to [0, 1]."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3).astype(np.float64) / 255.0
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1).astype(np.int64)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    return images, labels


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray) -> None:
    """Inverse of :func:`load_idx`; pixels in [0, 1] are rounded to bytes."""
    images = np.asarray(images)
    if images.dtype != np.uint8:
        images = np.clip(np.rint(np.asarray(images, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    labels = np.asarray(labels).astype(np.uint8)
    n, h, w = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


# ------------------------------------------------------------ image transforms


def _as_images(images) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 2:
        images = images[None]
    if images.ndim != 3:
        raise DataError(f"expected (n, h, w) images, got shape {images.shape}")
    return images


def halve_views(images, axis: str = "left-right", labels=None, split: str = "train") -> MultiViewDataset:
    """Split square images into two flattened halves (left|right or top|bottom)."""
    images = _as_images(images)
    _, h, w = images.shape
    if h != w or h % 2:
        raise DataError(f"halve_views needs square images with even side, got {h}x{w}")
    half = h // 2
    if axis == "left-right":
        a, b = images[:, :, :half], images[:, :, half:]
    elif axis == "top-bottom":
        a, b = images[:, :half, :], images[:, half:, :]
    else:
        raise DataError(f"axis must be 'left-right' or 'top-bottom', got {axis!r}")
    n = images.shape[0]
    return MultiViewDataset(a.reshape(n, -1), b.reshape(n, -1), labels, split)


def half_shape(side: int, axis: str = "left-right") -> tuple[int, int]:
    return (side, side // 2) if axis == "left-right" else (side // 2, side)


def reassemble(X, Y, side: int, axis: str = "left-right") -> np.ndarray:
    """Rebuild full images from the two flattened halves."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    h, w = half_shape(side, axis)
    a = X.reshape(-1, h, w)
    b = Y.reshape(-1, h, w)
    return np.concatenate([a, b], axis=2 if axis == "left-right" else 1)


def quadrant_slices(h: int, w: int) -> dict[int, tuple[slice, slice]]:
    """Quadrants numbered 1=top-left, 2=top-right, 3=bottom-left, 4=bottom-right."""
    r, c = -(-h // 2), -(-w // 2)
    return {
        1: (slice(0, r), slice(0, c)),
        2: (slice(0, r), slice(c, w)),
        3: (slice(r, h), slice(0, c)),
        4: (slice(r, h), slice(c, w)),
    }


def mask_quadrants(view, h: int, w: int, quadrants: Sequence[int] = (), fill: float = 0.5) -> np.ndarray:
    """Replace the selected quadrants of flattened h x w image(s) with ``fill``.

    Accepts one flattened view (length h*w) or a batch (n, h*w).
    """
    view = np.asarray(view, dtype=np.float64)
    if view.shape[-1] != h * w:
        raise DataError(f"view length {view.shape[-1]} does not match {h}x{w}")
    bad = set(quadrants) - {1, 2, 3, 4}
    if bad:
        raise DataError(f"quadrants must be in 1..4, got {sorted(bad)}")
    out = view.reshape(*view.shape[:-1], h, w).copy()
    slices = quadrant_slices(h, w)
    for q in quadrants:
        rs, cs = slices[q]
        out[..., rs, cs] = fill
    return out.reshape(view.shape)


def add_uniform_noise(images, low: float = 0.0, high: float = 1.0, seed=0) -> np.ndarray:
    """Add U(low, high) noise and clip back to [0, 1]."""
    images = np.asarray(images, dtype=np.float64)
    rng = np.random.default_rng(seed)
    return np.clip(images + rng.uniform(low, high, size=images.shape), 0.0, 1.0)


def rotate_images(images, max_degrees: float = 45.0, seed=0) -> np.ndarray:
    """Rotate each image by an angle drawn from U(-max, max) about its centre."""
    from scipy.ndimage import rotate

    images = _as_images(images)
    rng = np.random.default_rng(seed)
    angles = rng.uniform(-max_degrees, max_degrees, size=images.shape[0])
    return np.stack(
        [np.clip(rotate(im, a, reshape=False, order=1, mode="constant"), 0.0, 1.0) for im, a in zip(images, angles)]
    )


# -------------------------------------------------------------------- export


def export_csv(data: MultiViewDataset, path: str | os.PathLike) -> None:
    """Long-format CSV: one row per (view, sample)."""
    d = max(data.X.shape[1], data.Y.shape[1])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["view", "row_index", *[f"c{j}" for j in range(d)]])
        for name, mat in (("x", data.X), ("y", data.Y)):
            for i, row in enumerate(mat):
                wr.writerow([name, i, *[repr(float(v)) for v in row]])


def import_csv(path: str | os.PathLike, split: str = "train") -> MultiViewDataset:
    rows: dict[str, list[tuple[int, list[float]]]] = {"x": [], "y": []}
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if header[:2] != ["view", "row_index"]:
            raise DataError(f"{path}: unexpected header {header[:2]}")
        for rec in rd:
            vals = [float(v) for v in rec[2:] if v != ""]
            rows[rec[0]].append((int(rec[1]), vals))
    X = np.array([v for _, v in sorted(rows["x"])])
    Y = np.array([v for _, v in sorted(rows["y"])])
    return MultiViewDataset(X, Y, split=split)


def write_sidecar(path: str | os.PathLike, seed: int, proj: ToyProjections | None = None, **extra) -> None:
    meta = {"seed": seed, **extra}
    if proj is not None:
        meta["projection_seed"] = proj.seed
        meta["projection_sha256"] = proj.checksum()
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def train_test_indices(n: int, n_test: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])
