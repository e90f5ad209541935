from __future__ import annotations

import numpy as np

from .kernels import MetricError


def pair_angles(Z_x, Z_y) -> np.ndarray:
    """Angle (radians) at the origin between each paired embedding."""
    Z_x = np.atleast_2d(np.asarray(Z_x, dtype=np.float64))
    Z_y = np.atleast_2d(np.asarray(Z_y, dtype=np.float64))
    if Z_x.shape != Z_y.shape:
        raise MetricError(f"embedding shapes differ: {Z_x.shape} vs {Z_y.shape}")
    nx = np.linalg.norm(Z_x, axis=1)
    ny = np.linalg.norm(Z_y, axis=1)
    for name, norms in (("Z_x", nx), ("Z_y", ny)):
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise MetricError(f"{name} row {zero[0]} has zero norm")
    # half-angle form: exact zero for parallel rows, unlike arccos near 1
    ux = Z_x / nx[:, None]
    uy = Z_y / ny[:, None]
    return 2.0 * np.arctan2(np.linalg.norm(ux - uy, axis=1), np.linalg.norm(ux + uy, axis=1))


def misalignment_degree(Z_x, Z_y) -> float:
    """Mean pair angle divided by the largest pair angle; 0 when every angle is 0."""
    psi = pair_angles(Z_x, Z_y)
    if psi.size == 0:
        raise MetricError("misalignment_degree needs at least one pair")
    top = psi.max()
    if top == 0:
        return 0.0
    return float(np.mean(psi / top))
