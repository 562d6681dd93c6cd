import numpy as np
import pytest

from vosdenoise import diffops
from vosdenoise.fields import mixed_norm_21
from vosdenoise.imaging import NoiseSpec, SyntheticSpec, add_gaussian_noise, synthesize
from vosdenoise.models import (
    CURL_FREE_BETA1,
    interpolation_sweep,
    preset,
    preset_names,
    solve_tgv,
    solve_tv,
    solve_tv_reference,
)
from vosdenoise.regularizer import BetaVector
from vosdenoise.solver import SolverConfig, solve


def test_preset_table_values():
    assert preset("tgv").betas == (0.0, 0.5, 0.5, 0.5)
    assert preset("TGV_SYM").betas == (0.0, 0.5, 0.5, 0.5)
    assert preset("tgv-full").betas == (0.5, 0.5, 0.5, 0.5)
    assert preset("ictv").betas == (CURL_FREE_BETA1, 0.5, 0.5, 0.5)
    assert preset("cep").betas == (CURL_FREE_BETA1, 1.0, 0.0, 0.0)
    assert preset("svf").betas == (0.0, 1.0, 0.0, 0.0)
    assert preset("svf", svf_beta=2.5).betas == (0.0, 2.5, 0.0, 0.0)
    tv = preset("tv")
    assert tv.betas == (5e3, 5e3, 5e3, 5e3)
    assert preset("tgv", alpha=0.125).alpha == 0.125


def test_preset_determinism_and_names():
    assert preset("tgv") == preset("tgv")
    assert set(preset_names()) == {"tv", "svf", "cep", "tgv", "tgv-full", "ictv", "vos"}


def test_preset_rejects_bad_input():
    with pytest.raises(ValueError):
        preset("nope")
    with pytest.raises(ValueError):
        preset("vos")  # needs explicit betas
    with pytest.raises(ValueError):
        preset("vos", betas=(1, -1, 0, 0))
    with pytest.raises(ValueError):
        preset("vos", betas=(1, 2, 3))
    custom = preset("vos", betas=(4.5, 90, 9, 9), alpha=1 / 3)
    assert custom.betas == (4.5, 90.0, 9.0, 9.0)


def rof_dual_oracle(f, alpha, iters=20000):
    # projected gradient on the dual ball-constrained quadratic:
    # min_{|phi| <= alpha} 1/2 || div(phi) + f ||^2, u = f + div(phi)
    from vosdenoise.fields import project_l2_ball

    phi = np.zeros((2,) + f.shape)
    step = 1.0 / 8.0
    for _ in range(iters):
        r = diffops.div(phi) + f
        phi = project_l2_ball(phi - step * -diffops.grad(r), alpha)
        # gradient of the objective in phi is div_adjoint(r) = -grad(r)
    return f + diffops.div(phi)


def test_tv_reference_trivial_cases():
    f = np.full((16, 16), 0.3)
    assert np.allclose(solve_tv_reference(f, 0.25, SolverConfig(max_iters=50)), f)
    rng = np.random.default_rng(0)
    g = rng.uniform(0, 1, (16, 16))
    out = solve_tv_reference(g, 1e-10, SolverConfig(max_iters=500))
    assert np.max(np.abs(out - g)) <= 1e-6


def test_tv_reference_against_dual_projected_gradient_oracle():
    # step image: contrast shrinks, mean preserved
    f = np.zeros((8, 8))
    f[:, 4:] = 1.0
    alpha = 0.3
    u = solve_tv_reference(f, alpha, SolverConfig(max_iters=20000, tolerance=1e-9))
    oracle = rof_dual_oracle(f, alpha, iters=40000)
    assert np.max(np.abs(u - oracle)) <= 1e-4
    assert u.mean() == pytest.approx(f.mean(), abs=1e-8)
    assert u.max() < f.max()


def test_tv_alpha_validation():
    with pytest.raises(ValueError):
        solve_tv(np.zeros((8, 8)), 0.0)


def test_tgv_matches_unified_model_minimizer():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 32)), NoiseSpec(0, 0.05, 3))
    cfg = SolverConfig(max_iters=12000, tolerance=1e-7, log_every=1000)
    a = solve(f, BetaVector(0, 0.5, 0.5, 0.5, alpha=1 / 3), cfg)
    b = solve_tgv(f, 1 / 3, 1 / 3, cfg)
    assert np.max(np.abs(a.u - b.u)) <= 1e-4


def test_tgv_alpha_ratio_maps_to_weights():
    # TGV with alpha0 != alpha1 equals the unified model with scaled weights
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 24)), NoiseSpec(0, 0.05, 4))
    cfg = SolverConfig(max_iters=12000, tolerance=1e-7, log_every=1000)
    alpha1, alpha0 = 0.3, 0.6
    ratio2 = (alpha0 / alpha1) ** 2
    a = solve(f, BetaVector(0, ratio2 / 2, ratio2 / 2, ratio2 / 2, alpha=alpha1), cfg)
    b = solve_tgv(f, alpha1, alpha0, cfg)
    assert np.max(np.abs(a.u - b.u)) <= 1e-4


def test_tgv_variants_differ_but_slightly():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 32)), NoiseSpec(0, 0.05, 5))
    cfg = SolverConfig(max_iters=3000, tolerance=1e-6, log_every=500)
    a = solve_tgv(f, 0.4, 1.6, cfg, variant=diffops.DiscretizationVariant.CONSERVATION_PRESERVING)
    b = solve_tgv(f, 0.4, 1.6, cfg, variant=diffops.DiscretizationVariant.BREDIES_REFERENCE)
    diff = np.max(np.abs(a.u - b.u))
    assert 0 < diff < 0.1


def test_interpolation_sweep_single_point_and_validation():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 24)), NoiseSpec(0, 0.05, 6))
    cfg = SolverConfig(max_iters=500, log_every=100)
    pts = interpolation_sweep(f, [1.0], alpha=0.25, config=cfg)
    assert len(pts) == 1
    assert pts[0].curl_mass >= 0
    assert pts[0].curl_mass == pytest.approx(
        mixed_norm_21(diffops.curl(pts[0].report.w)), rel=1e-12)
    with pytest.raises(ValueError):
        interpolation_sweep(f, [], config=cfg)
    with pytest.raises(ValueError):
        interpolation_sweep(f, [2.0, 1.0], config=cfg)


def test_interpolation_sweep_monotone_trend_small():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 32)), NoiseSpec(0, 0.05, 7))
    cfg = SolverConfig(max_iters=3000, log_every=500)
    pts = interpolation_sweep(f, [0.0, 25.0, 1e10], alpha=0.25, config=cfg)
    masses = [p.curl_mass for p in pts]
    assert masses[0] > masses[1] > masses[2]
