"""k-nearest-neighbour (conditional) mutual information estimators."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .kernels import MetricError

JITTER = 1e-10


def _as_2d(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def _count_within(points: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Neighbours strictly closer than ``radii`` (Chebyshev), self excluded."""
    tree = cKDTree(points)
    r = np.nextafter(radii, 0)
    return tree.query_ball_point(points, r, p=np.inf, return_length=True) - 1


def cmi_ksg(X, Y, Z, k: int = 3, seed: int = 0) -> float:
    """Frenzel-Pompe estimate of I(X; Y | Z) in nats.

    The k-th neighbour radius is taken in the joint (x, y, z) space under the
    max-norm; marginal counts use strict inequality. A seeded jitter of
    ``1e-10`` scale breaks ties between duplicate points.
    """
    X, Y, Z = _as_2d(X), _as_2d(Y), _as_2d(Z)
    n = X.shape[0]
    if Y.shape[0] != n or Z.shape[0] != n:
        raise MetricError(f"row counts differ: {n}, {Y.shape[0]}, {Z.shape[0]}")
    if not 1 <= k < n:
        raise MetricError(f"need N > k >= 1, got N={n}, k={k}")
    rng = np.random.default_rng(seed)
    X = X + JITTER * rng.random(X.shape)
    Y = Y + JITTER * rng.random(Y.shape)
    Z = Z + JITTER * rng.random(Z.shape)

    joint = np.hstack([X, Y, Z])
    dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    radii = dist[:, -1]
    if np.any(radii <= 0):
        raise MetricError("zero neighbour radius after jitter; data has too many duplicates")
    n_xz = _count_within(np.hstack([X, Z]), radii)
    n_yz = _count_within(np.hstack([Y, Z]), radii)
    n_z = _count_within(Z, radii)
    return float(digamma(k) - np.mean(digamma(n_xz + 1) + digamma(n_yz + 1) - digamma(n_z + 1)))


def mi_ksg(X, Y, k: int = 3, seed: int = 0) -> float:
    """KSG (first algorithm) estimate of I(X; Y) in nats."""
    X, Y = _as_2d(X), _as_2d(Y)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise MetricError(f"row counts differ: {n} vs {Y.shape[0]}")
    if not 1 <= k < n:
        raise MetricError(f"need N > k >= 1, got N={n}, k={k}")
    rng = np.random.default_rng(seed)
    X = X + JITTER * rng.random(X.shape)
    Y = Y + JITTER * rng.random(Y.shape)
    joint = np.hstack([X, Y])
    dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    radii = dist[:, -1]
    nx = _count_within(X, radii)
    ny = _count_within(Y, radii)
    return float(digamma(k) + digamma(n) - np.mean(digamma(nx + 1) + digamma(ny + 1)))
