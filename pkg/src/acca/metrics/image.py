"""Image quality scores on [0, 1] grayscale arrays."""
from __future__ import annotations

import numpy as np

from .kernels import MetricError

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 8


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise MetricError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return pred, truth


def pixel_accuracy(pred, truth) -> float:
    """1 - RMSE over all pixels."""
    pred, truth = _pair(pred, truth)
    return float(1.0 - np.sqrt(np.mean((pred - truth) ** 2)))


def psnr(pred, truth, max_val: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images are identical."""
    if not max_val > 0:
        raise MetricError(f"max_val must be positive, got {max_val}")
    pred, truth = _pair(pred, truth)
    mse = float(np.mean((pred - truth) ** 2))
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(max_val * max_val / mse))


def _windows(img: np.ndarray, size: int) -> np.ndarray:
    h, w = img.shape[-2:]
    if h < size or w < size:
        return img.reshape(*img.shape[:-2], 1, h * w)
    hh, ww = h - h % size, w - w % size
    img = img[..., :hh, :ww]
    blocks = img.reshape(*img.shape[:-2], hh // size, size, ww // size, size)
    blocks = np.moveaxis(blocks, -3, -2)
    return blocks.reshape(*img.shape[:-2], -1, size * size)


def ssim(pred, truth, data_range: float = 1.0, window: int = SSIM_WINDOW) -> float:
    """Mean SSIM over non-overlapping ``window`` x ``window`` blocks.

    Accepts a single (h, w) image or a stack (n, h, w); trailing rows/columns
    that do not fill a block are ignored. Images smaller than one block are
    scored as a single window.
    """
    pred, truth = _pair(pred, truth)
    if pred.ndim < 2:
        raise MetricError(f"ssim expects 2-D images, got shape {pred.shape}")
    a = _windows(pred, window)
    b = _windows(truth, window)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mu_a, mu_b = a.mean(axis=-1), b.mean(axis=-1)
    var_a = a.var(axis=-1)
    var_b = b.var(axis=-1)
    cov = ((a - mu_a[..., None]) * (b - mu_b[..., None])).mean(axis=-1)
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def sharpness(image) -> float:
    """Mean gradient magnitude from forward differences (last two axes)."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim < 2:
        raise MetricError(f"sharpness expects 2-D images, got shape {img.shape}")
    gy = np.diff(img, axis=-2)[..., :, :-1]
    gx = np.diff(img, axis=-1)[..., :-1, :]
    return float(np.mean(np.sqrt(gx * gx + gy * gy)))
