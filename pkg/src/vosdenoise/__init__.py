"""Image denoising with a joint vector-operator sparsity regularizer."""

from .fields import (
    ShapeError,
    inner_product,
    mixed_norm_21,
    pointwise_magnitude,
    project_l2_ball,
)
from .diffops import (
    BoundaryScheme,
    DiscretizationVariant,
    adjoint_of,
    backward_diff,
    check_conservation,
    curl,
    difference,
    div,
    forward_diff,
    grad,
    shear1,
    shear2,
    sym_grad,
)
from .regularizer import BetaVector, ModelOperator, apply_K, apply_K_adjoint, energy
from .solver import SolverConfig, SolverReport, solve
from .models import interpolation_sweep, preset, solve_tgv, solve_tv, solve_tv_reference
from .metrics import QualityTriple, psnr, quality, rel_error, ssim
from .imaging import (
    NoiseSpec,
    SyntheticKind,
    SyntheticSpec,
    add_gaussian_noise,
    load_field_raw,
    load_image,
    save_field_raw,
    save_image,
    synthesize,
)

__version__ = "0.1.0"
