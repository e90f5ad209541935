"""Embedding analyses: k-means clustering and a linear-probe classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .kernels import MetricError


@dataclass
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    wcss: list[float]


def _kmeans_pp(Z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = Z.shape[0]
    centers = [Z[rng.integers(n)]]
    d2 = ((Z - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total == 0 else rng.choice(n, p=d2 / total)
        centers.append(Z[idx])
        d2 = np.minimum(d2, ((Z - Z[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans(Z, k: int, seed: int = 0, iters: int = 100) -> KMeansResult:
    """Lloyd iterations from k-means++ seeding.

    ``wcss`` records the within-cluster sum of squares after every assignment
    step. An empty cluster is re-seeded at the point farthest from its centroid.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    n = Z.shape[0]
    if not 1 <= k <= n:
        raise MetricError(f"k must lie in [1, N={n}], got {k}")
    rng = np.random.default_rng(seed)
    C = _kmeans_pp(Z, k, rng)
    trace: list[float] = []
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        D = cdist(Z, C, "sqeuclidean")
        labels = D.argmin(axis=1)
        dmin = D[np.arange(n), labels]
        trace.append(float(dmin.sum()))
        newC = C.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                newC[j] = Z[members].mean(axis=0)
            else:
                far = int(dmin.argmax())
                newC[j] = Z[far]
                dmin[far] = 0.0
        if np.array_equal(newC, C):
            break
        C = newC
    D = cdist(Z, C, "sqeuclidean")
    labels = D.argmin(axis=1)
    final = float(D[np.arange(n), labels].sum())
    if final != trace[-1]:
        trace.append(final)
    return KMeansResult(labels, C, trace)


def cluster_purity(assign, labels) -> float:
    assign = np.asarray(assign)
    labels = np.asarray(labels)
    hits = 0
    for c in np.unique(assign):
        hits += np.bincount(labels[assign == c]).max()
    return hits / labels.size


def linear_probe(
    Z,
    labels,
    splits: tuple[np.ndarray, np.ndarray],
    epochs: int = 50,
    lr: float = 0.01,
    reg: float = 1e-4,
    seed: int = 0,
) -> float:
    """Test accuracy of a one-vs-rest linear SVM trained by hinge-loss SGD.

    ``splits`` is (train indices, test indices). Features are standardised with
    training-split statistics.
    """
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels)
    tr, te = (np.asarray(s) for s in splits)
    classes = np.unique(labels[tr])
    if classes.size < 2:
        raise MetricError("linear_probe needs at least two classes in the training split")
    mu = Z[tr].mean(axis=0)
    sd = Z[tr].std(axis=0)
    sd[sd == 0] = 1.0
    Xtr = (Z[tr] - mu) / sd
    Xte = (Z[te] - mu) / sd
    ytr = np.where(labels[tr][:, None] == classes[None, :], 1.0, -1.0)

    rng = np.random.default_rng(seed)
    n, p = Xtr.shape
    W = np.zeros((p, classes.size))
    b = np.zeros(classes.size)
    batch = min(64, n)
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            xb, yb = Xtr[idx], ytr[idx]
            margin = yb * (xb @ W + b)
            active = (margin < 1.0) * yb
            step += 1
            eta = lr / (1.0 + lr * reg * step)
            W -= eta * (reg * W - xb.T @ active / idx.size)
            b -= eta * (-active.mean(axis=0))
    pred = classes[np.argmax(Xte @ W + b, axis=1)]
    return float(np.mean(pred == labels[te]))
