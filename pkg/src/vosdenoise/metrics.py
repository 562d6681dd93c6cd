"""Image quality measures: SSIM, PSNR and relative error.

SSIM uses an 11x11 Gaussian window (sigma 1.5), constants K1 = 0.01 and
K2 = 0.03, dynamic range 1.0, averaged over fully interior window positions
(no padding). PSNR uses peak 1.0 and returns +inf for identical images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .fields import ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 1.0


def _gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # separable correlation, valid region only
    out = sliding_window_view(img, len(kernel), axis=0) @ kernel
    out = sliding_window_view(out, len(kernel), axis=1) @ kernel
    return out


def _check_pair(u, ref):
    u = np.asarray(u, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if u.shape != ref.shape:
        raise ShapeError(f"shape mismatch: {u.shape} vs {ref.shape}")
    return u, ref


def ssim(u: np.ndarray, ref: np.ndarray, window: int = SSIM_WINDOW,
         sigma: float = SSIM_SIGMA, k1: float = SSIM_K1, k2: float = SSIM_K2,
         data_range: float = DATA_RANGE) -> float:
    u, ref = _check_pair(u, ref)
    if min(u.shape) < window:
        raise ValueError(f"image smaller than the {window}x{window} SSIM window")
    kern = _gaussian_kernel(window, sigma)
    mu1 = _filter_valid(u, kern)
    mu2 = _filter_valid(ref, kern)
    s11 = _filter_valid(u * u, kern) - mu1 * mu1
    s22 = _filter_valid(ref * ref, kern) - mu2 * mu2
    s12 = _filter_valid(u * ref, kern) - mu1 * mu2
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
    return float(np.mean(num / den))


def psnr(u: np.ndarray, ref: np.ndarray, data_range: float = DATA_RANGE) -> float:
    u, ref = _check_pair(u, ref)
    mse = float(np.mean((u - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(data_range * data_range / mse)


def rel_error(u: np.ndarray, ref: np.ndarray) -> float:
    u, ref = _check_pair(u, ref)
    denom = float(np.linalg.norm(ref))
    if denom == 0.0:
        raise ValueError("reference has zero norm")
    return float(np.linalg.norm(u - ref)) / denom


@dataclass(frozen=True)
class QualityTriple:
    ssim: float
    psnr: float
    rel_error: float


def quality(u: np.ndarray, ref: np.ndarray) -> QualityTriple:
    return QualityTriple(ssim=ssim(u, ref), psnr=psnr(u, ref), rel_error=rel_error(u, ref))
