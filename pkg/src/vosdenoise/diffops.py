"""Discrete first-order differential operators on 2D grids.

Two primitive one-dimensional differences are used throughout, h = 1:

  forward_diff  (Neumann):    d[i] = a[i+1] - a[i],  d[last] = 0
  backward_diff (Dirichlet):  d[0] = a[0],  d[i] = a[i] - a[i-1],  d[last] = -a[last-1]

These are exact negated adjoints of each other, so every operator adjoint
below is a mechanical transpose of its stencil rather than a transcription
of the continuous formula; boundary rules come out right by construction.

The operator family

  grad u   = (dx+ u, dy+ u)
  div w    = dx- w1 + dy- w2
  curl w   = dx+ w2 - dy+ w1
  shear1 w = dy- w2 - dx- w1
  shear2 w = dy+ w1 + dx+ w2

satisfies the conservation identities curl(grad u) = 0, div(curl* u) = 0,
shear1(shear2* u) = 0 and shear2(shear1* u) = 0 pixelwise to rounding,
because same-direction differences along different axes commute. The
all-backward variant recalled in `check_conservation(variant=BREDIES)`
violates them, which is the whole reason for the mixed forward/backward
choice above.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .fields import as_scalar_field, as_vector_field


class BoundaryScheme(Enum):
    FORWARD_NEUMANN = "forward-neumann"
    BACKWARD_DIRICHLET = "backward-dirichlet"


class DiscretizationVariant(Enum):
    CONSERVATION_PRESERVING = "conservation"
    BREDIES_REFERENCE = "bredies"


def forward_diff(a: np.ndarray, axis: int) -> np.ndarray:
    """Forward difference with the value extended by zero past the last index."""
    out = np.zeros_like(a, dtype=np.float64)
    lead = _leading(a, axis)
    out[lead + (slice(None, -1),)] = np.diff(a, axis=axis)
    return out


def backward_diff(a: np.ndarray, axis: int) -> np.ndarray:
    """Backward difference with homogeneous Dirichlet endpoints.

    First entry keeps a[0], last entry is -a[last-1]; the final input sample
    never enters the output (it sits on the zero boundary).
    """
    out = np.empty_like(a, dtype=np.float64)
    lead = _leading(a, axis)
    out[lead + (slice(0, 1),)] = a[lead + (slice(0, 1),)]
    out[lead + (slice(1, -1),)] = (
        a[lead + (slice(1, -1),)] - a[lead + (slice(0, -2),)]
    )
    out[lead + (slice(-1, None),)] = -a[lead + (slice(-2, -1),)]
    return out


def _leading(a: np.ndarray, axis: int) -> tuple:
    if axis < 0:
        axis += a.ndim
    return (slice(None),) * axis


def difference(a: np.ndarray, axis: int, scheme: BoundaryScheme) -> np.ndarray:
    if scheme is BoundaryScheme.FORWARD_NEUMANN:
        return forward_diff(a, axis)
    if scheme is BoundaryScheme.BACKWARD_DIRICHLET:
        return backward_diff(a, axis)
    raise ValueError(f"unknown boundary scheme {scheme!r}")


# scalar -> vector

def grad(u: np.ndarray) -> np.ndarray:
    u = as_scalar_field(u)
    return np.stack([forward_diff(u, 0), forward_diff(u, 1)])


def grad_adjoint(p: np.ndarray) -> np.ndarray:
    p = as_vector_field(p)
    return -(backward_diff(p[0], 0) + backward_diff(p[1], 1))


# vector -> scalar

def div(w: np.ndarray) -> np.ndarray:
    w = as_vector_field(w)
    return backward_diff(w[0], 0) + backward_diff(w[1], 1)


def div_adjoint(s: np.ndarray) -> np.ndarray:
    s = as_scalar_field(s)
    return np.stack([-forward_diff(s, 0), -forward_diff(s, 1)])


def curl(w: np.ndarray) -> np.ndarray:
    w = as_vector_field(w)
    return forward_diff(w[1], 0) - forward_diff(w[0], 1)


def curl_adjoint(s: np.ndarray) -> np.ndarray:
    s = as_scalar_field(s)
    return np.stack([backward_diff(s, 1), -backward_diff(s, 0)])


def shear1(w: np.ndarray) -> np.ndarray:
    w = as_vector_field(w)
    return backward_diff(w[1], 1) - backward_diff(w[0], 0)


def shear1_adjoint(s: np.ndarray) -> np.ndarray:
    s = as_scalar_field(s)
    return np.stack([forward_diff(s, 0), -forward_diff(s, 1)])


def shear2(w: np.ndarray) -> np.ndarray:
    w = as_vector_field(w)
    return forward_diff(w[0], 1) + forward_diff(w[1], 0)


def shear2_adjoint(s: np.ndarray) -> np.ndarray:
    s = as_scalar_field(s)
    return np.stack([-backward_diff(s, 1), -backward_diff(s, 0)])


_ADJOINT_PAIRS = {}


def _register(op, adj):
    _ADJOINT_PAIRS[op] = adj
    _ADJOINT_PAIRS[adj] = op


_register(grad, grad_adjoint)
_register(div, div_adjoint)
_register(curl, curl_adjoint)
_register(shear1, shear1_adjoint)
_register(shear2, shear2_adjoint)


def adjoint_of(op):
    """Adjoint partner of one of the named operators (an involution)."""
    try:
        return _ADJOINT_PAIRS[op]
    except KeyError:
        raise ValueError(f"no adjoint registered for {op!r}") from None


# symmetrized derivative, channels (e11, e12, e22)

def sym_grad(w: np.ndarray, variant: DiscretizationVariant = DiscretizationVariant.CONSERVATION_PRESERVING) -> np.ndarray:
    """Per-pixel symmetric 2x2 derivative of w as 3 channels (e11, e12, e22).

    Diagonal entries are backward differences in both variants; the
    off-diagonal uses forward differences (conservation-preserving) or
    backward differences (the reference scheme this one is compared against).
    """
    w = as_vector_field(w)
    e11 = backward_diff(w[0], 0)
    e22 = backward_diff(w[1], 1)
    if variant is DiscretizationVariant.CONSERVATION_PRESERVING:
        e12 = 0.5 * (forward_diff(w[0], 1) + forward_diff(w[1], 0))
    else:
        e12 = 0.5 * (backward_diff(w[0], 1) + backward_diff(w[1], 0))
    return np.stack([e11, e12, e22])


def sym_grad_adjoint(g: np.ndarray, variant: DiscretizationVariant = DiscretizationVariant.CONSERVATION_PRESERVING) -> np.ndarray:
    """Adjoint of sym_grad with respect to the plain 3-channel inner product."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 3 or g.shape[0] != 3:
        raise ValueError(f"expected (3, n1, n2) field, got shape {g.shape}")
    e11, e12, e22 = g
    w1 = -forward_diff(e11, 0)
    w2 = -forward_diff(e22, 1)
    if variant is DiscretizationVariant.CONSERVATION_PRESERVING:
        w1 = w1 - 0.5 * backward_diff(e12, 1)
        w2 = w2 - 0.5 * backward_diff(e12, 0)
    else:
        w1 = w1 - 0.5 * forward_diff(e12, 1)
        w2 = w2 - 0.5 * forward_diff(e12, 0)
    return np.stack([w1, w2])


# all-backward operators of the reference scheme, used only to demonstrate
# that the conservation identities genuinely fail there

def _curl_backward(w: np.ndarray) -> np.ndarray:
    w = as_vector_field(w)
    return backward_diff(w[1], 0) - backward_diff(w[0], 1)


def _curl_backward_adjoint(s: np.ndarray) -> np.ndarray:
    s = as_scalar_field(s)
    return np.stack([forward_diff(s, 1), -forward_diff(s, 0)])


def _shear1_backward_adjoint(s: np.ndarray) -> np.ndarray:
    # identical stencil family to shear1 (already backward); adjoint is forward
    return shear1_adjoint(s)


def _shear2_backward(w: np.ndarray) -> np.ndarray:
    w = as_vector_field(w)
    return backward_diff(w[0], 1) + backward_diff(w[1], 0)


def _shear2_backward_adjoint(s: np.ndarray) -> np.ndarray:
    s = as_scalar_field(s)
    return np.stack([-forward_diff(s, 1), -forward_diff(s, 0)])


@dataclass(frozen=True)
class ConservationReport:
    curl_grad: float
    div_curl_adj: float
    sh1_sh2_adj: float
    sh2_sh1_adj: float
    variant: DiscretizationVariant
    trials: int
    size: tuple[int, int]

    def max_residual(self) -> float:
        return max(self.curl_grad, self.div_curl_adj, self.sh1_sh2_adj, self.sh2_sh1_adj)

    def rows(self):
        return [
            ("curl(grad u)", self.curl_grad),
            ("div(curl* u)", self.div_curl_adj),
            ("sh1(sh2* u)", self.sh1_sh2_adj),
            ("sh2(sh1* u)", self.sh2_sh1_adj),
        ]


def check_conservation(
    n: int,
    trials: int = 10,
    rng_seed: int = 0,
    variant: DiscretizationVariant = DiscretizationVariant.CONSERVATION_PRESERVING,
) -> ConservationReport:
    """Max conservation residuals over random uniform [0,1] fields.

    With the conservation-preserving operators all four maxima sit at rounding
    level; with the all-backward reference curl/shear the mixed compositions
    are O(1) on random input.
    """
    if n < 2 or trials < 1:
        raise ValueError("need n >= 2 and trials >= 1")
    rng = np.random.default_rng(rng_seed)
    if variant is DiscretizationVariant.CONSERVATION_PRESERVING:
        curl_op, curl_adj = curl, curl_adjoint
        sh2_op, sh2_adj = shear2, shear2_adjoint
    else:
        curl_op, curl_adj = _curl_backward, _curl_backward_adjoint
        sh2_op, sh2_adj = _shear2_backward, _shear2_backward_adjoint
    maxima = np.zeros(4)
    for _ in range(trials):
        u = rng.uniform(0.0, 1.0, size=(n, n))
        maxima[0] = max(maxima[0], np.max(np.abs(curl_op(grad(u)))))
        maxima[1] = max(maxima[1], np.max(np.abs(div(curl_adj(u)))))
        maxima[2] = max(maxima[2], np.max(np.abs(shear1(sh2_adj(u)))))
        maxima[3] = max(maxima[3], np.max(np.abs(sh2_op(shear1_adjoint(u)))))
    return ConservationReport(
        curl_grad=float(maxima[0]),
        div_curl_adj=float(maxima[1]),
        sh1_sh2_adj=float(maxima[2]),
        sh2_sh1_adj=float(maxima[3]),
        variant=variant,
        trials=trials,
        size=(n, n),
    )
