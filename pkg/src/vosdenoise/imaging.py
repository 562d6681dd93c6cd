"""Image I/O, seeded noise, and synthetic test images.

Supported file formats: binary portable graymap (P5, 8 or 16 bit), grayscale
PNG (8 or 16 bit), and a raw float sidecar for exact reproducibility:
8-byte magic ``VOSFLD01``, two little-endian uint32 dimensions (rows, cols),
then float64 little-endian row-major samples. Images load scaled to [0,1];
saving clamps to [0,1] and quantizes round-half-up. Noisy fields are kept
unclamped in memory and in sidecars; quantized export is for viewing.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .fields import MIN_SIDE, as_scalar_field

FIELD_MAGIC = b"VOSFLD01"


class ImageFormatError(ValueError):
    """Unsupported or malformed image file."""


@dataclass(frozen=True)
class NoiseSpec:
    mean: float = 0.0
    variance: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"variance must be nonnegative, got {self.variance}")


def add_gaussian_noise(u: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """u plus i.i.d. Gaussian noise from a generator seeded by spec (not clamped)."""
    u = as_scalar_field(u)
    rng = np.random.default_rng(spec.seed)
    return u + rng.normal(spec.mean, math.sqrt(spec.variance), size=u.shape)


class SyntheticKind(Enum):
    PIECEWISE_AFFINE_SQUARE = "square"
    AFFINE_PLANE = "affine"
    RADIAL_QUADRATIC = "radial"
    SADDLE_QUADRATIC = "saddle"
    PRODUCT_QUADRATIC = "product"
    HARMONIC = "harmonic"


@dataclass(frozen=True)
class SyntheticSpec:
    kind: SyntheticKind
    size: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", SyntheticKind(self.kind))
        minimum = 8 if self.kind is SyntheticKind.PIECEWISE_AFFINE_SQUARE else MIN_SIDE
        if self.size < minimum:
            raise ValueError(f"{self.kind.value} needs size >= {minimum}, got {self.size}")


def _coords(n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.linspace(-1.0, 1.0, n)
    return x[:, None], x[None, :]


def _normalize(v: np.ndarray) -> np.ndarray:
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        return (v - lo) / (hi - lo)
    return np.clip(v, 0.0, 1.0)


def synthesize(spec: SyntheticSpec) -> np.ndarray:
    """Deterministic test image on an n x n grid, normalized to [0,1]."""
    n = spec.size
    x1, x2 = _coords(n)
    p = spec.params
    kind = spec.kind
    if kind is SyntheticKind.AFFINE_PLANE:
        v = p.get("a", 1.0) * x1 + p.get("b", 0.5) * x2 + p.get("c", 0.0)
        v = v + np.zeros((n, n))
    elif kind is SyntheticKind.RADIAL_QUADRATIC:
        v = x1 * x1 + x2 * x2
    elif kind is SyntheticKind.SADDLE_QUADRATIC:
        v = x1 * x1 - x2 * x2
    elif kind is SyntheticKind.PRODUCT_QUADRATIC:
        v = x1 * x2
    elif kind is SyntheticKind.HARMONIC:
        v = x1 ** 3 - 3.0 * x1 * x2 * x2
    elif kind is SyntheticKind.PIECEWISE_AFFINE_SQUARE:
        # affine background with a centered square (side n/2) on a different plane
        v = 0.1 + 0.25 * x1 + 0.15 * x2 + np.zeros((n, n))
        side = n // 2
        lo = (n - side) // 2
        hi = lo + side
        inner = 0.8 - 0.3 * x1 - 0.2 * x2 + np.zeros((n, n))
        v[lo:hi, lo:hi] = inner[lo:hi, lo:hi]
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unknown synthetic kind {kind!r}")
    return _normalize(v)


# file I/O

def save_image(u: np.ndarray, path, bit_depth: int = 8) -> None:
    """Clamp to [0,1], quantize round-half-up, write PGM or PNG by extension."""
    u = as_scalar_field(u)
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    path = Path(path)
    maxval = (1 << bit_depth) - 1
    q = np.floor(np.clip(u, 0.0, 1.0) * maxval + 0.5)
    q = np.minimum(q, maxval)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        _write_pgm(q, path, maxval)
    elif suffix == ".png":
        arr = q.astype(np.uint8) if bit_depth == 8 else q.astype(np.uint16)
        Image.fromarray(arr).save(path)  # uint8 -> L, uint16 -> I;16
    else:
        raise ImageFormatError(f"unsupported image extension {path.suffix!r} (use .pgm or .png)")


def _write_pgm(q: np.ndarray, path: Path, maxval: int) -> None:
    n1, n2 = q.shape
    header = f"P5\n{n2} {n1}\n{maxval}\n".encode("ascii")
    payload = q.astype(">u2" if maxval > 255 else np.uint8).tobytes(order="C")
    path.write_bytes(header + payload)


def load_image(path) -> np.ndarray:
    """Grayscale PGM/PNG scaled to [0,1]; rejects color images and tiny grids."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        arr, maxval = _read_pgm(path)
    elif suffix == ".png":
        img = Image.open(path)
        if img.mode == "L":
            arr, maxval = np.asarray(img, dtype=np.float64), 255
        elif img.mode in ("I;16", "I"):
            arr, maxval = np.asarray(img, dtype=np.float64), 65535
        else:
            raise ImageFormatError(f"unsupported PNG mode {img.mode!r} (grayscale only)")
    else:
        raise ImageFormatError(f"unsupported image extension {path.suffix!r}")
    if arr.ndim != 2 or min(arr.shape) < MIN_SIDE:
        raise ImageFormatError(f"image too small for stencils: shape {arr.shape}")
    return arr / float(maxval)


def _read_pgm(path: Path) -> tuple[np.ndarray, int]:
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise ImageFormatError(f"{path} is not a binary PGM (P5) file")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError(f"truncated PGM header in {path}")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        n2, n1, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ImageFormatError(f"bad PGM header in {path}") from exc
    if maxval <= 0 or maxval > 65535 or n1 <= 0 or n2 <= 0:
        raise ImageFormatError(f"bad PGM header values in {path}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = n1 * n2
    raw = data[pos : pos + count * dtype.itemsize]
    if len(raw) != count * dtype.itemsize:
        raise ImageFormatError(f"truncated PGM payload in {path}")
    arr = np.frombuffer(raw, dtype=dtype).reshape(n1, n2).astype(np.float64)
    return arr, maxval


def save_field_raw(u: np.ndarray, path) -> None:
    """Exact float64 sidecar (magic, uint32 dims, row-major little-endian data)."""
    u = as_scalar_field(u)
    n1, n2 = u.shape
    payload = FIELD_MAGIC + struct.pack("<II", n1, n2) + u.astype("<f8").tobytes(order="C")
    Path(path).write_bytes(payload)


def load_field_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != FIELD_MAGIC:
        raise ImageFormatError(f"{path} is not a raw field sidecar")
    n1, n2 = struct.unpack("<II", data[8:16])
    expect = 16 + 8 * n1 * n2
    if len(data) != expect:
        raise ImageFormatError(f"raw field sidecar {path} has wrong length")
    return np.frombuffer(data[16:], dtype="<f8").reshape(n1, n2).copy()
