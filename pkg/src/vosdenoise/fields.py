"""Dense 2D grid fields and the handful of reductions everything else builds on.

A scalar field is a float64 array of shape (n1, n2); axis 0 is the x1
direction, axis 1 the x2 direction. Vector and quad fields carry a leading
channel axis: (2, n1, n2) and (4, n1, n2). All operations here are pure and
never mutate their inputs, so fields can be shared freely across threads.
"""

from __future__ import annotations

import numpy as np

MIN_SIDE = 2  # stencils need at least one interior difference


class ShapeError(ValueError):
    """Field shapes or channel counts do not match."""


def as_scalar_field(data) -> np.ndarray:
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"scalar field must be 2D, got shape {a.shape}")
    _check_grid(a.shape)
    return a


def as_vector_field(data) -> np.ndarray:
    return _as_channel_field(data, 2)


def as_quad_field(data) -> np.ndarray:
    return _as_channel_field(data, 4)


def _as_channel_field(data, channels: int) -> np.ndarray:
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 3 or a.shape[0] != channels:
        raise ShapeError(f"expected ({channels}, n1, n2) field, got shape {a.shape}")
    _check_grid(a.shape[1:])
    return a


def _check_grid(shape) -> None:
    n1, n2 = shape
    if n1 < MIN_SIDE or n2 < MIN_SIDE:
        raise ShapeError(f"grid must be at least {MIN_SIDE}x{MIN_SIDE}, got {n1}x{n2}")


def inner_product(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of a*b over all pixels and channels."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(a * b))


def pointwise_magnitude(v: np.ndarray) -> np.ndarray:
    """Per-pixel Euclidean magnitude over the channel axis (2D input = one channel)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 2:
        return np.abs(v)
    return np.sqrt(np.sum(v * v, axis=0))


def mixed_norm_21(v: np.ndarray) -> float:
    """L2,1 norm: sum over pixels of the per-pixel channel magnitude."""
    return float(np.sum(pointwise_magnitude(v)))


def project_l2_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Project each pixel's channel vector onto the Euclidean ball of the given radius.

    Pixels already inside the ball are copied through unchanged (bit-identical).
    """
    if radius < 0:
        raise ValueError(f"radius must be nonnegative, got {radius}")
    v = np.asarray(v, dtype=np.float64)
    m = pointwise_magnitude(v)
    scale = np.ones_like(m)
    outside = m > radius
    scale[outside] = radius / m[outside]
    return v * scale
