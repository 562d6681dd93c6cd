"""Named weight presets for the classical models, plus reference solvers.

The joint model contains the familiar regularizers as weight patterns:
symmetric-gradient second-order (tgv) at (0, 1/2, 1/2, 1/2), the
full-gradient variant (tgv-full) at (1/2, 1/2, 1/2, 1/2), the curl-free
infimal-convolution model (ictv) as the large-beta1 limit, the
divergence-only pair (cep, svf), and plain total variation (tv) as the limit
of scaling all weights up. Large limits use finite stand-ins: 1e10 for the
curl weight, a factor 1e4 on all squared weights for the TV limit.

solve_tv / solve_tgv run the same primal-dual machinery on the smaller
operators; they double as independent cross-checks of the unified solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import diffops
from .diffops import DiscretizationVariant
from .fields import as_scalar_field, mixed_norm_21
from .regularizer import BetaVector, power_iteration_norm
from .solver import SaddlePointProblem, SolverConfig, SolverReport, run_primal_dual, solve

CURL_FREE_BETA1 = 1e10
TV_SCALE = 1e4

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ModelPreset:
    name: str
    cli_name: str
    betas: tuple[float, float, float, float] | None  # None: caller must supply
    notes: str


PRESETS = {
    p.name: p
    for p in (
        ModelPreset("TV_LIMIT", "tv", (0.5 * TV_SCALE,) * 4,
                    "all operators, scaled toward the total-variation limit"),
        ModelPreset("SVF", "svf", (0.0, 1.0, 0.0, 0.0),
                    "divergence only; known to produce point artefacts"),
        ModelPreset("CEP_APPROX", "cep", (CURL_FREE_BETA1, 1.0, 0.0, 0.0),
                    "curl-free divergence model; known to produce point artefacts"),
        ModelPreset("TGV_SYM", "tgv", (0.0, 0.5, 0.5, 0.5),
                    "symmetric-gradient second-order model"),
        ModelPreset("TGV_FULL", "tgv-full", (0.5, 0.5, 0.5, 0.5),
                    "full-gradient second-order model"),
        ModelPreset("ICTV_APPROX", "ictv", (CURL_FREE_BETA1, 0.5, 0.5, 0.5),
                    "curl-free limit of the second-order model"),
        ModelPreset("VOS_CUSTOM", "vos", None,
                    "user-specified operator weights"),
    )
}

_CLI_TO_NAME = {p.cli_name: p.name for p in PRESETS.values()}


def preset_names() -> tuple[str, ...]:
    return tuple(_CLI_TO_NAME)


def preset(name: str, alpha: float = 0.25,
           betas: Sequence[float] | None = None,
           svf_beta: float | None = None) -> BetaVector:
    """Weight vector for a named model, with optional overrides.

    `name` is either the canonical preset name or its CLI string. `betas`
    replaces the table values (required for `vos`); `svf_beta` sets the
    divergence weight of the `svf` preset.
    """
    key = str(name)
    key = _CLI_TO_NAME.get(key.lower(), key).upper()
    if key not in PRESETS:
        raise ValueError(f"unknown model preset {name!r}; known: {sorted(_CLI_TO_NAME)}")
    entry = PRESETS[key]
    values = entry.betas
    if key == "SVF" and svf_beta is not None:
        values = (0.0, float(svf_beta), 0.0, 0.0)
    if betas is not None:
        values = tuple(float(b) for b in betas)
        if len(values) != 4:
            raise ValueError("betas override must have exactly 4 entries")
    if values is None:
        raise ValueError(f"preset {entry.cli_name!r} requires explicit betas")
    if any(b < 0 for b in values):
        raise ValueError(f"negative weight in override {values}")
    return BetaVector(*values, alpha=alpha)


def solve_tv(f: np.ndarray, alpha: float, config: SolverConfig | None = None) -> SolverReport:
    """Quadratic-fidelity total variation denoising via the shared solver loop."""
    f = as_scalar_field(f)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if config is None:
        config = SolverConfig()

    def apply_K(x):
        return (diffops.grad(x[0]),)

    def apply_Kt(y):
        return (diffops.grad_adjoint(y[0]),)

    L = power_iteration_norm(apply_K, apply_Kt, (np.zeros(f.shape),),
                             iterations=config.norm_power_iters, seed=0)
    problem = SaddlePointProblem(apply_K, apply_Kt, radii=(float(alpha),), norm_K=L)
    return run_primal_dual(problem, f, (f,), config)


def solve_tv_reference(f: np.ndarray, alpha: float,
                       config: SolverConfig | None = None) -> np.ndarray:
    """Denoised image of the total-variation model (oracle for the scaling limit)."""
    return solve_tv(f, alpha, config).u


def _sym_grad_packed(w: np.ndarray, variant: DiscretizationVariant) -> np.ndarray:
    # channels (e11, e22, sqrt(2) e12): Euclidean length equals the Frobenius
    # norm of the symmetric matrix with the off-diagonal counted twice
    g = diffops.sym_grad(w, variant)
    return np.stack([g[0], g[2], _SQRT2 * g[1]])


def _sym_grad_packed_adjoint(z: np.ndarray, variant: DiscretizationVariant) -> np.ndarray:
    return diffops.sym_grad_adjoint(np.stack([z[0], _SQRT2 * z[2], z[1]]), variant)


def solve_tgv(f: np.ndarray, alpha1: float, alpha0: float,
              config: SolverConfig | None = None,
              variant: DiscretizationVariant = DiscretizationVariant.CONSERVATION_PRESERVING,
              ) -> SolverReport:
    """Second-order model with an explicit symmetrized-derivative term.

    Minimizes 1/2||u-f||^2 + alpha1 sum|grad u - w| + alpha0 sum|E(w)|_F with
    E in either discretization variant.
    """
    f = as_scalar_field(f)
    if not alpha1 > 0 or not alpha0 > 0:
        raise ValueError("alpha1 and alpha0 must be positive")
    if config is None:
        config = SolverConfig()

    def apply_K(x):
        u, w = x
        return (diffops.grad(u) - w, _sym_grad_packed(w, variant))

    def apply_Kt(y):
        y1, y2 = y
        return (-diffops.div(y1), -y1 + _sym_grad_packed_adjoint(y2, variant))

    templates = (np.zeros(f.shape), np.zeros((2,) + f.shape))
    L = power_iteration_norm(apply_K, apply_Kt, templates,
                             iterations=config.norm_power_iters, seed=0)
    problem = SaddlePointProblem(apply_K, apply_Kt,
                                 radii=(float(alpha1), float(alpha0)), norm_K=L)
    return run_primal_dual(problem, f, (f, diffops.grad(f)), config)


@dataclass(frozen=True)
class InterpolationPoint:
    beta1: float
    curl_mass: float
    report: SolverReport


def interpolation_sweep(f: np.ndarray, beta1_values: Sequence[float],
                        alpha: float = 0.25,
                        base: tuple[float, float, float] = (0.5, 0.5, 0.5),
                        config: SolverConfig | None = None) -> list[InterpolationPoint]:
    """Solve across curl weights and record the curl mass of the returned field.

    Raising beta1 drives the auxiliary field toward curl-free, moving the
    model from the symmetric-gradient regime to the curl-free limit; the
    recorded sum of |curl w| is the interpolation diagnostic.
    """
    values = [float(b) for b in beta1_values]
    if not values:
        raise ValueError("beta1_values must be nonempty")
    if any(b2 < b1 for b1, b2 in zip(values, values[1:])):
        raise ValueError("beta1_values must be nondecreasing")
    out = []
    for b1 in values:
        beta = BetaVector(b1, base[0], base[1], base[2], alpha=alpha)
        report = solve(f, beta, config)
        curl_mass = mixed_norm_21(diffops.curl(report.w))
        out.append(InterpolationPoint(beta1=b1, curl_mass=curl_mass, report=report))
    return out
