from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    """``kind`` is "linear" or "rbf"; ``bandwidth=None`` means median heuristic."""

    kind: str = "linear"
    bandwidth: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise MetricError(f"unknown kernel kind {self.kind!r}")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise MetricError(f"kernel bandwidth must be positive, got {self.bandwidth}")

    @property
    def label(self) -> str:
        return self.kind if self.bandwidth is None else f"{self.kind}({self.bandwidth:g})"


def median_bandwidth(A: np.ndarray) -> float:
    d = pdist(A)
    med = float(np.median(d)) if d.size else 0.0
    return med if med > 0 else 1.0


def gram(A: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if kernel.kind == "linear":
        return A @ A.T
    sigma = kernel.bandwidth if kernel.bandwidth is not None else median_bandwidth(A)
    sq = cdist(A, A, "sqeuclidean")
    return np.exp(-sq / (2.0 * sigma * sigma))


def _centered(K: np.ndarray) -> np.ndarray:
    return K - K.mean(axis=0, keepdims=True) - K.mean(axis=1, keepdims=True) + K.mean()


def hsic(A, B, kernel: KernelSpec = KernelSpec()) -> float:
    """Biased HSIC: trace(K H L H) / (N - 1)^2."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    n = A.shape[0]
    if B.shape[0] != n:
        raise MetricError(f"row counts differ: {n} vs {B.shape[0]}")
    Kc = _centered(gram(A, kernel))
    Lc = _centered(gram(B, kernel))
    return float(np.sum(Kc * Lc) / (n - 1) ** 2)


def nhsic(A, B, kernel: KernelSpec = KernelSpec()) -> float:
    """HSIC(A, B) normalised by sqrt(HSIC(A, A) HSIC(B, B)); lies in [0, 1]."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[0] != B.shape[0]:
        raise MetricError(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")
    if A.shape[0] < 4:
        raise MetricError(f"nhsic needs at least 4 rows, got {A.shape[0]}")
    Kc = _centered(gram(A, kernel))
    Lc = _centered(gram(B, kernel))
    kk = np.sum(Kc * Kc)
    ll = np.sum(Lc * Lc)
    if kk <= 0 or ll <= 0:
        raise MetricError("self-HSIC is zero (constant input)")
    return float(np.sum(Kc * Lc) / np.sqrt(kk * ll))


def _rbf_sum(A: np.ndarray, B: np.ndarray, gamma: float, block: int = 1024) -> float:
    """Sum of exp(gamma * |a - b|^2) over all pairs, in fixed row-block order."""
    total = 0.0
    for start in range(0, A.shape[0], block):
        total += float(np.exp(gamma * cdist(A[start:start + block], B, "sqeuclidean")).sum())
    return total


def mmd2(A, B, bandwidth: float, biased: bool = False) -> float:
    """Squared MMD with Gaussian kernel exp(-|u - v|^2 / (2 sigma^2)).

    The default is the unbiased U-statistic (diagonal terms excluded), which
    can go slightly negative.
    """
    if not bandwidth > 0:
        raise MetricError(f"bandwidth must be positive, got {bandwidth}")
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    n, m = A.shape[0], B.shape[0]
    if n < 2 or m < 2:
        raise MetricError(f"mmd2 needs at least 2 samples per set, got {n} and {m}")
    g = -1.0 / (2.0 * bandwidth * bandwidth)
    saa, sbb, sab = _rbf_sum(A, A, g), _rbf_sum(B, B, g), _rbf_sum(A, B, g)
    if biased:
        return saa / (n * n) + sbb / (m * m) - 2.0 * sab / (n * m)
    # the kernel diagonal is exactly 1
    return (saa - n) / (n * (n - 1)) + (sbb - m) / (m * (m - 1)) - 2.0 * sab / (n * m)
