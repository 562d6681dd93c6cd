"""Weighted natural-operator stack and the saddle-point model operator.

The denoising model couples an image u and an auxiliary vector field w:

  min_{u,w}  1/2 ||u - f||^2
             + alpha * sum_px |grad(u) - w|
             + alpha * sum_px |(sqrt(b1) curl w, sqrt(b2) div w,
                                sqrt(b3) sh1 w,  sqrt(b4) sh2 w)|

The square-root weights are folded into the operator rows so both L1 blocks
see plain Euclidean pixel magnitudes and the dual update stays an exact ball
projection. Rows with a zero weight are dropped from the compact operator
(identical model, smaller duals); the module-level apply_K/apply_K_adjoint
keep the full 4-channel layout with zero channels for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import diffops
from .fields import ShapeError, as_scalar_field, as_vector_field, mixed_norm_21

NATURAL_OPS: tuple[Callable, ...] = (diffops.curl, diffops.div, diffops.shear1, diffops.shear2)
NATURAL_ADJOINTS: tuple[Callable, ...] = (
    diffops.curl_adjoint,
    diffops.div_adjoint,
    diffops.shear1_adjoint,
    diffops.shear2_adjoint,
)
CHANNEL_NAMES = ("curl", "div", "shear1", "shear2")


@dataclass(frozen=True)
class BetaVector:
    """Squared operator weights (beta1..beta4) plus the overall weight alpha.

    beta1 weights the curl, beta2 the divergence, beta3/beta4 the two shear
    components. The folded operator rows carry sqrt(beta_i).
    """

    beta1: float
    beta2: float
    beta3: float
    beta4: float
    alpha: float = 0.25

    def __post_init__(self):
        for name in ("beta1", "beta2", "beta3", "beta4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def betas(self) -> tuple[float, float, float, float]:
        return (self.beta1, self.beta2, self.beta3, self.beta4)

    @property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.betas, dtype=np.float64))

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.betas) if b > 0)

    @property
    def zero_count(self) -> int:
        return 4 - len(self.active)

    @property
    def rotation_invariant(self) -> bool:
        return self.beta3 == self.beta4

    def scaled(self, factor: float) -> "BetaVector":
        return BetaVector(*(b * factor for b in self.betas), alpha=self.alpha)

    def replace(self, **kwargs) -> "BetaVector":
        vals = dict(beta1=self.beta1, beta2=self.beta2, beta3=self.beta3,
                    beta4=self.beta4, alpha=self.alpha)
        vals.update(kwargs)
        return BetaVector(**vals)


class ModelOperator:
    """Compact linear operator (u, w) -> (grad u - w, weighted active operator rows).

    The uniform part of the weights is kept out of the operator rows: with
    s = min(active sqrt weights), apply() carries the full sqrt(beta_i) rows
    while apply_scaled() carries sqrt(beta_i)/s rows, so a solver can pair the
    scaled rows with a dual ball of radius alpha*s. The two forms describe the
    exact same objective (a scalar factors out of the pointwise Euclidean
    norm), but the scaled operator's norm does not blow up when all weights
    are large together. Immutable after construction; apply/adjoint are pure.
    """

    def __init__(self, shape: tuple[int, int], beta: BetaVector):
        n1, n2 = shape
        if n1 < 2 or n2 < 2:
            raise ShapeError(f"grid must be at least 2x2, got {shape}")
        self.shape = (int(n1), int(n2))
        self.beta = beta
        self.active = beta.active
        w_all = beta.sqrt_weights
        self.weights = tuple(float(w_all[i]) for i in self.active)
        self.scale = min(self.weights) if self.weights else 1.0
        self.scaled_weights = tuple(w / self.scale for w in self.weights)
        self._ops = tuple(NATURAL_OPS[i] for i in self.active)
        self._adjoints = tuple(NATURAL_ADJOINTS[i] for i in self.active)
        self._norm_cache: dict[tuple, float] = {}

    @property
    def n_quad_channels(self) -> int:
        return len(self.active)

    def _apply(self, u, w, weights) -> tuple[np.ndarray, np.ndarray]:
        u = as_scalar_field(u)
        w = as_vector_field(w)
        if u.shape != self.shape or w.shape[1:] != self.shape:
            raise ShapeError(f"operator built for {self.shape}, got {u.shape} / {w.shape}")
        y1 = diffops.grad(u) - w
        if self.active:
            y2 = np.stack([wt * op(w) for wt, op in zip(weights, self._ops)])
        else:
            y2 = np.zeros((0,) + self.shape)
        return y1, y2

    def _adjoint(self, y1, y2, weights) -> tuple[np.ndarray, np.ndarray]:
        y1 = as_vector_field(y1)
        y2 = np.asarray(y2, dtype=np.float64)
        if y1.shape[1:] != self.shape or y2.shape != (len(self.active),) + self.shape:
            raise ShapeError(
                f"operator built for {self.shape} with {len(self.active)} quad rows, "
                f"got {y1.shape} / {y2.shape}"
            )
        ut = -diffops.div(y1)
        wt = -y1
        for wt_scale, adj, chan in zip(weights, self._adjoints, y2):
            wt = wt + wt_scale * adj(chan)
        return ut, wt

    def apply(self, u: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._apply(u, w, self.weights)

    def adjoint(self, y1: np.ndarray, y2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._adjoint(y1, y2, self.weights)

    def apply_scaled(self, u: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._apply(u, w, self.scaled_weights)

    def adjoint_scaled(self, y1: np.ndarray, y2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._adjoint(y1, y2, self.scaled_weights)

    def _norm(self, scaled: bool, iterations: int, seed: int) -> float:
        key = (scaled, iterations, seed)
        if key not in self._norm_cache:
            templates = (np.zeros(self.shape), np.zeros((2,) + self.shape))
            fwd = self.apply_scaled if scaled else self.apply
            adj = self.adjoint_scaled if scaled else self.adjoint
            self._norm_cache[key] = power_iteration_norm(
                lambda x: fwd(*x), lambda y: adj(*y), templates,
                iterations=iterations, seed=seed)
        return self._norm_cache[key]

    def norm(self, iterations: int = 200, seed: int = 0) -> float:
        return self._norm(False, iterations, seed)

    def norm_scaled(self, iterations: int = 200, seed: int = 0) -> float:
        return self._norm(True, iterations, seed)


def apply_K(u: np.ndarray, w: np.ndarray, beta: BetaVector) -> tuple[np.ndarray, np.ndarray]:
    """Full model operator with the 4-channel quad layout (zero rows kept)."""
    op = ModelOperator(np.shape(u), beta)
    y1, y2c = op.apply(u, w)
    y2 = np.zeros((4,) + op.shape)
    for k, i in enumerate(op.active):
        y2[i] = y2c[k]
    return y1, y2


def apply_K_adjoint(y1: np.ndarray, y2: np.ndarray, beta: BetaVector) -> tuple[np.ndarray, np.ndarray]:
    """Transpose of apply_K; inactive channels of y2 are ignored (zero weight)."""
    y1 = as_vector_field(y1)
    y2 = np.asarray(y2, dtype=np.float64)
    if y2.shape != (4,) + y1.shape[1:]:
        raise ShapeError(f"expected y2 of shape (4,{y1.shape[1]},{y1.shape[2]}), got {y2.shape}")
    op = ModelOperator(y1.shape[1:], beta)
    y2c = np.stack([y2[i] for i in op.active]) if op.active else np.zeros((0,) + op.shape)
    return op.adjoint(y1, y2c)


@dataclass(frozen=True)
class EnergyTerms:
    total: float
    fidelity: float
    coupling: float
    operator_term: float


def energy(u: np.ndarray, w: np.ndarray, f: np.ndarray, beta: BetaVector) -> EnergyTerms:
    """Objective value split into fidelity, coupling and operator terms."""
    u = as_scalar_field(u)
    f = as_scalar_field(f)
    if u.shape != f.shape:
        raise ShapeError(f"shape mismatch: {u.shape} vs {f.shape}")
    op = ModelOperator(u.shape, beta)
    y1, y2 = op.apply(u, w)
    fidelity = 0.5 * float(np.sum((u - f) ** 2))
    coupling = beta.alpha * mixed_norm_21(y1)
    operator_term = beta.alpha * mixed_norm_21(y2) if op.active else 0.0
    return EnergyTerms(
        total=fidelity + coupling + operator_term,
        fidelity=fidelity,
        coupling=coupling,
        operator_term=operator_term,
    )


def power_iteration_norm(apply_fwd, apply_adj, templates: Sequence[np.ndarray],
                         iterations: int = 200, seed: int = 0,
                         safety: float = 1.01) -> float:
    """Largest singular value of a linear operator, estimated by power iteration.

    Tracks the Rayleigh quotient of K*K, which is nondecreasing along the
    iteration; the result is multiplied by a small safety factor so step-size
    bounds derived from it stay valid.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng(seed)
    x = [rng.standard_normal(t.shape) for t in templates]
    lam = 0.0
    for _ in range(iterations):
        nrm = np.sqrt(sum(float(np.sum(c * c)) for c in x))
        if nrm == 0.0:
            return 0.0
        x = [c / nrm for c in x]
        y = apply_fwd(tuple(x))
        lam = sum(float(np.sum(b * b)) for b in y)  # Rayleigh quotient of K*K
        x = list(apply_adj(tuple(y)))
    return float(np.sqrt(lam)) * safety


def estimate_operator_norm(beta: BetaVector, shape: tuple[int, int],
                           iterations: int = 200, seed: int = 0) -> float:
    """Power-iteration estimate of the model operator norm (with safety factor)."""
    return ModelOperator(shape, beta).norm(iterations=iterations, seed=seed)
