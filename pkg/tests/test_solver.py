import numpy as np
import pytest

from vosdenoise import diffops
from vosdenoise.fields import project_l2_ball
from vosdenoise.imaging import NoiseSpec, SyntheticSpec, add_gaussian_noise, synthesize
from vosdenoise.regularizer import BetaVector, ModelOperator, energy
from vosdenoise.solver import (
    ConfigError,
    DivergenceError,
    SolverConfig,
    adapt_steps,
    dual_step,
    prox_data,
    residuals,
    solve,
)

BETA = BetaVector(0, 0.5, 0.5, 0.5, alpha=1 / 3)


def test_prox_data_fixed_point_and_limits():
    f = np.full((4, 4), 0.3)
    assert np.allclose(prox_data(f, f, 0.7), f)
    u = np.zeros((4, 4))
    f1 = np.ones((4, 4))
    assert np.allclose(prox_data(u, f1, 1.0), 0.5)
    assert np.allclose(prox_data(u, f1, 1e8), 1.0, atol=1e-7)
    with pytest.raises(ValueError):
        prox_data(u, f1, 0.0)


def test_prox_data_matches_formula():
    rng = np.random.default_rng(0)
    u = rng.standard_normal((5, 5))
    f = rng.standard_normal((5, 5))
    tau = 0.37
    expected = np.empty_like(u)
    for i in range(5):
        for j in range(5):
            expected[i, j] = (u[i, j] + tau * f[i, j]) / (1 + tau)
    assert np.allclose(prox_data(u, f, tau), expected, atol=1e-15)


def test_dual_step_identity_inside_balls():
    rng = np.random.default_rng(1)
    y1 = 0.01 * rng.standard_normal((2, 4, 4))
    y2 = 0.01 * rng.standard_normal((4, 4, 4))
    o1, o2 = dual_step(y1, y2, np.zeros_like(y1), np.zeros_like(y2), 0.5, alpha=1.0)
    assert np.array_equal(o1, y1)
    assert np.array_equal(o2, y2)


def test_dual_step_projects_to_radius():
    y2 = np.zeros((4, 1, 1))
    k2 = np.zeros((4, 1, 1))
    y2[0, 0, 0] = 3.0
    y2[1, 0, 0] = 4.0
    _, o2 = dual_step(np.zeros((2, 1, 1)), y2, np.zeros((2, 1, 1)), k2, 1.0, alpha=1.0)
    assert np.hypot(o2[0, 0, 0], o2[1, 0, 0]) == pytest.approx(1.0)
    assert o2[0, 0, 0] == pytest.approx(0.6)


def test_dual_step_is_projection_after_axpy():
    rng = np.random.default_rng(2)
    y1 = rng.standard_normal((2, 6, 6))
    y2 = rng.standard_normal((4, 6, 6))
    k1 = rng.standard_normal((2, 6, 6))
    k2 = rng.standard_normal((4, 6, 6))
    sigma, alpha = 0.41, 0.8
    o1, o2 = dual_step(y1, y2, k1, k2, sigma, alpha)
    assert np.array_equal(o1, project_l2_ball(y1 + sigma * k1, alpha))
    assert np.array_equal(o2, project_l2_ball(y2 + sigma * k2, alpha))


def test_adapt_steps_directions_and_product():
    # balanced: unchanged
    assert adapt_steps(1.0, 1.0, 0.2, 0.3) == (0.2, 0.3, 0.95)
    # primal dominates: tau grows, sigma shrinks, product invariant
    t, s, eta = adapt_steps(10.0, 1.0, 0.2, 0.3, eta=0.95, balance_ratio=2.0)
    assert t > 0.2 and s < 0.3
    assert t * s == pytest.approx(0.06, rel=1e-15)
    assert eta > 0.95  # damped toward 1
    # dual dominates: mirrored
    t2, s2, _ = adapt_steps(1.0, 10.0, 0.2, 0.3, eta=0.95, balance_ratio=2.0)
    assert t2 < 0.2 and s2 > 0.3
    assert t2 * s2 == pytest.approx(0.06, rel=1e-15)
    # disabled adaptation is expressed by not calling it; residual validation:
    with pytest.raises(ValueError):
        adapt_steps(-1.0, 0.0, 0.1, 0.1)


def test_adapt_steps_eta_approaches_one():
    eta = 0.95
    for _ in range(200):
        _, _, eta = adapt_steps(10.0, 1.0, 0.1, 0.1, eta=eta)
    assert 0.999 < eta < 1.0


def test_residuals_zero_at_stationary_state():
    op = ModelOperator((6, 6), BETA)
    x = (np.ones((6, 6)), np.zeros((2, 6, 6)))
    y = (np.zeros((2, 6, 6)), np.zeros((3, 6, 6)))
    p, d = residuals(x, x, y, y, 0.3, 0.4,
                     lambda t: op.apply(*t), lambda t: op.adjoint(*t))
    assert p == 0.0
    assert d == 0.0


def test_residuals_positive_on_moving_state():
    rng = np.random.default_rng(3)
    op = ModelOperator((6, 6), BETA)
    x0 = (rng.standard_normal((6, 6)), rng.standard_normal((2, 6, 6)))
    x1 = (rng.standard_normal((6, 6)), rng.standard_normal((2, 6, 6)))
    y0 = (rng.standard_normal((2, 6, 6)), rng.standard_normal((3, 6, 6)))
    y1 = (rng.standard_normal((2, 6, 6)), rng.standard_normal((3, 6, 6)))
    p, d = residuals(x0, x1, y0, y1, 0.3, 0.4,
                     lambda t: op.apply(*t), lambda t: op.adjoint(*t))
    assert p > 0 and d > 0


def test_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(max_iters=0).validate()
    with pytest.raises(ConfigError):
        SolverConfig(theta=1.5).validate()
    with pytest.raises(ConfigError):
        SolverConfig(tolerance=0).validate()
    with pytest.raises(ConfigError):
        SolverConfig(tau0=-1.0).validate()
    f = np.zeros((8, 8))
    with pytest.raises(ConfigError):
        solve(f, BETA, SolverConfig(tau0=10.0, sigma0=10.0))


def test_constant_input_is_fixed_point():
    f = np.full((12, 12), 0.42)
    rep = solve(f, BETA, SolverConfig(max_iters=40))
    assert np.max(np.abs(rep.u - 0.42)) <= 1e-14
    assert rep.converged


def test_alpha_to_zero_returns_data():
    rng = np.random.default_rng(4)
    f = rng.uniform(0, 1, (16, 16))
    rep = solve(f, BetaVector(0, .5, .5, .5, alpha=1e-12), SolverConfig(max_iters=2000))
    assert np.max(np.abs(rep.u - f)) <= 1e-6


def test_solver_determinism():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 32)), NoiseSpec(0, 0.05, 2))
    cfg = SolverConfig(max_iters=300, log_every=50)
    a = solve(f, BETA, cfg)
    b = solve(f, BETA, cfg)
    assert np.array_equal(a.u, b.u)
    assert np.array_equal(a.w, b.w)
    assert a.iterations == b.iterations
    assert [r.total for r in a.log] == [r.total for r in b.log]


def test_energy_not_worse_than_feasible_competitor():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 32)), NoiseSpec(0, 0.05, 8))
    rep = solve(f, BETA, SolverConfig(max_iters=3000, log_every=500))
    final = energy(rep.u, rep.w, f, BETA).total
    competitor = energy(f, diffops.grad(f), f, BETA).total
    assert final <= competitor
    assert final == pytest.approx(rep.log[-1].total, rel=1e-10)


def test_mean_preservation():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 32)), NoiseSpec(0, 0.05, 12))
    rep = solve(f, BETA, SolverConfig(max_iters=2000))
    assert abs(rep.u.mean() - f.mean()) <= 1e-6


def test_report_log_and_convergence_flag():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 24)), NoiseSpec(0, 0.02, 5))
    cfg = SolverConfig(max_iters=5000, tolerance=1e-4, log_every=10)
    rep = solve(f, BETA, cfg)
    assert rep.converged
    assert max(rep.primal_residual, rep.dual_residual) <= 1e-4
    assert rep.log[-1].iteration == rep.iterations
    iters = [r.iteration for r in rep.log]
    assert iters == sorted(iters)


def test_divergence_error_reports_iteration():
    f = np.zeros((8, 8))
    f[4, 4] = np.inf
    with np.errstate(invalid="ignore", over="ignore"):
        with pytest.raises(DivergenceError, match="iteration"):
            solve(f, BETA, SolverConfig(max_iters=10))


def test_log_csv_roundtrip(tmp_path):
    import csv

    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 24)), NoiseSpec(0, 0.02, 5))
    rep = solve(f, BETA, SolverConfig(max_iters=200, log_every=25))
    path = tmp_path / "log.csv"
    rep.write_log_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iter", "total", "fidelity", "coupling", "operator",
                       "primal_res", "dual_res", "tau", "sigma"]
    assert len(rows) == len(rep.log) + 1
    assert float(rows[1][1]) == pytest.approx(rep.log[0].total, rel=1e-10)


def test_solve_with_all_zero_weights_returns_data_term_solution():
    # no operator rows: w chases grad u and the model collapses to u = f
    rng = np.random.default_rng(9)
    f = rng.uniform(0, 1, (16, 16))
    rep = solve(f, BetaVector(0, 0, 0, 0, alpha=0.25), SolverConfig(max_iters=4000))
    assert rep.w is not None
    assert np.max(np.abs(rep.u - f)) <= 1e-3


def test_theta_zero_still_runs():
    f = add_gaussian_noise(synthesize(SyntheticSpec("square", 16)), NoiseSpec(0, 0.02, 1))
    rep = solve(f, BETA, SolverConfig(max_iters=200, theta=0.0))
    assert rep.iterations == 200 or rep.converged


def test_noisy_affine_recovered_near_affine():
    # denoising an affine ramp: second differences of the result collapse to
    # a few percent of the noise level
    sigma2 = 0.05
    truth = synthesize(SyntheticSpec("affine", 64, {"a": 1.0, "b": 0.6, "c": 0.0}))
    noisy = add_gaussian_noise(truth, NoiseSpec(0.0, sigma2, seed=3))
    rep = solve(noisy, BETA, SolverConfig(max_iters=8000, log_every=1000))
    bound = 0.05 * np.sqrt(sigma2)
    d2_0 = np.abs(np.diff(rep.u, n=2, axis=0))[2:-2, 2:-2]
    d2_1 = np.abs(np.diff(rep.u, n=2, axis=1))[2:-2, 2:-2]
    assert max(d2_0.max(), d2_1.max()) <= bound
