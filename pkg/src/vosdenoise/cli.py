"""Command-line interface: denoise, compare, sweep, check-ops, synth.

Every artifact-producing command writes a plain-text provenance record
(key=value lines: parameters, seeds, versions) next to its outputs, so any
result can be regenerated exactly from the record alone.

Exit codes: 0 success, 1 violated operator identity (check-ops), 2 invalid
flags, 3 I/O failure, 4 solver divergence.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, diffops, figures, metrics, models
from .diffops import DiscretizationVariant
from .fields import inner_product
from .imaging import (
    ImageFormatError,
    NoiseSpec,
    SyntheticKind,
    SyntheticSpec,
    add_gaussian_noise,
    load_image,
    save_field_raw,
    save_image,
    synthesize,
)
from .regularizer import BetaVector
from .solver import ConfigError, DivergenceError, SolverConfig, solve
from .sweep import SweepPlan, classify_and_bin, run_sweep, write_histogram_csv

EXIT_OK = 0
EXIT_IDENTITY = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DIVERGED = 4

SINGLE_OPERATOR_ARTEFACTS = {
    0: "curl-only weights leave every image in the nullspace: the input is returned unchanged",
    1: "divergence-only weights are known to produce point artefacts",
    2: "shear1-only weights are known to produce diagonal stripe artefacts",
    3: "shear2-only weights are known to produce stripe artefacts parallel to the coordinate axes",
}


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _parse_floats(text, count=None, name="value list"):
    try:
        vals = [float(v) for v in text.split(",") if v != ""]
    except ValueError as exc:
        raise CliError(f"bad {name}: {text!r}") from exc
    if count is not None and len(vals) != count:
        raise CliError(f"{name} needs {count} comma-separated values, got {len(vals)}")
    return vals


def write_provenance(path, entries: dict) -> None:
    lines = [f"{k}={entries[k]}" for k in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def _provenance_base(args) -> dict:
    entries = {"version": __version__, "numpy_version": np.__version__,
               "command": args.command}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "command") or val is None:
            continue
        entries[f"arg.{key}"] = val
    return entries


def _add_input_flags(p: argparse.ArgumentParser):
    p.add_argument("--input", help="grayscale image file (pgm/png)")
    p.add_argument("--synth", choices=[k.value for k in SyntheticKind],
                   help="generate a synthetic test image instead of reading a file")
    p.add_argument("--size", type=int, default=128, help="synthetic image size (default 128)")
    p.add_argument("--noise-var", type=float, default=None,
                   help="add Gaussian noise of this variance to the (clean) input")
    p.add_argument("--seed", type=int, default=0, help="noise seed (default 0)")
    p.add_argument("--truth", help="ground-truth image for metrics")


def _add_solver_flags(p: argparse.ArgumentParser):
    p.add_argument("--tol", type=float, default=1e-5, help="residual tolerance (default 1e-5)")
    p.add_argument("--max-iters", type=int, default=5000, help="iteration cap (default 5000)")


def _resolve_input(args):
    """Returns (noisy_input, truth_or_None). Noise is added when requested."""
    if (args.input is None) == (args.synth is None):
        raise CliError("exactly one of --input or --synth is required")
    if args.synth is not None:
        truth = synthesize(SyntheticSpec(args.synth, args.size))
    else:
        truth = load_image(args.input)
    f = truth
    if args.noise_var is not None:
        if args.noise_var < 0:
            raise CliError("--noise-var must be nonnegative")
        f = add_gaussian_noise(truth, NoiseSpec(0.0, args.noise_var, args.seed))
    if args.truth is not None:
        truth = load_image(args.truth)
    elif args.noise_var is None and args.synth is None:
        truth = None  # plain file input with no stated ground truth
    return f, truth


def _solver_config(args) -> SolverConfig:
    return SolverConfig(max_iters=args.max_iters, tolerance=args.tol)


def _warn_on_weights(beta: BetaVector) -> None:
    if len(beta.active) == 1:
        print(f"warning: {SINGLE_OPERATOR_ARTEFACTS[beta.active[0]]}", file=sys.stderr)
    sq = [beta.sqrt_weights[i] for i in beta.active]
    if sq and max(sq) / min(sq) > 1e3:
        print("warning: extreme weight ratios make scalar-step convergence "
              "impractically slow; the heavy operators are forced toward zero "
              "but the result is not a converged denoise at default budgets",
              file=sys.stderr)


def _beta_from_flags(args) -> BetaVector:
    if not args.alpha > 0:
        raise CliError(f"--alpha must be > 0, got {args.alpha}")
    if (args.model is None) == (args.beta is None):
        raise CliError("exactly one of --model or --beta is required")
    if args.beta is not None:
        b = _parse_floats(args.beta, 4, "--beta")
        if any(v < 0 for v in b):
            raise CliError(f"--beta weights must be nonnegative, got {b}")
        beta = BetaVector(*b, alpha=args.alpha)
    else:
        beta = models.preset(args.model, alpha=args.alpha,
                             svf_beta=getattr(args, "svf_beta", None))
    _warn_on_weights(beta)
    return beta


def _print_metrics(u, truth) -> dict:
    q = metrics.quality(np.clip(u, 0.0, 1.0), truth)
    print(f"ssim={q.ssim:.4f} psnr={q.psnr:.2f} rel_error={q.rel_error:.4f}")
    return {"ssim": f"{q.ssim:.6f}", "psnr": f"{q.psnr:.4f}", "rel_error": f"{q.rel_error:.6f}"}


# denoise

def cmd_denoise(args) -> int:
    f, truth = _resolve_input(args)
    beta = _beta_from_flags(args)
    config = _solver_config(args)
    report = solve(f, beta, config)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_image(report.u, out)
    prov = _provenance_base(args)
    prov.update({"iterations": report.iterations, "converged": report.converged,
                 "norm_K": f"{report.norm_K:.9g}",
                 "beta": ",".join(f"{b:g}" for b in beta.betas), "alpha": f"{beta.alpha:g}"})
    if args.sidecar:
        save_field_raw(report.u, out.with_suffix(out.suffix + ".vosfld"))
    if args.log:
        report.write_log_csv(args.log)
        if args.figures:
            figures.save_convergence_figure(report, Path(args.log).with_suffix(".png"))
    print(f"{'converged' if report.converged else 'stopped'} after {report.iterations} "
          f"iterations (residuals {report.primal_residual:.2e}/{report.dual_residual:.2e})")
    if truth is not None:
        prov.update(_print_metrics(report.u, truth))
    write_provenance(out.with_suffix(out.suffix + ".prov.txt"), prov)
    return EXIT_OK


# compare

def _compare_single(name, f, args, config):
    alpha = args.alpha
    variant_map = {"conservation": DiscretizationVariant.CONSERVATION_PRESERVING,
                   "bredies": DiscretizationVariant.BREDIES_REFERENCE}
    runs = []
    if name == "tv":
        t0 = time.perf_counter()
        rep = models.solve_tv(f, alpha, config)
        runs.append(("tv", rep, {"alpha": alpha}, time.perf_counter() - t0))
    elif name == "tgv":
        alpha0 = alpha * args.tgv_ratio
        wanted = ["conservation", "bredies"] if args.discretization == "both" else [args.discretization]
        for var in wanted:
            t0 = time.perf_counter()
            rep = models.solve_tgv(f, alpha, alpha0, config, variant=variant_map[var])
            label = "tgv" if len(wanted) == 1 else f"tgv-{var}"
            runs.append((label, rep, {"alpha1": alpha, "alpha0": alpha0,
                                      "discretization": var}, time.perf_counter() - t0))
    else:
        beta = models.preset(name, alpha=alpha,
                             betas=_parse_floats(args.beta, 4, "--beta") if name == "vos" else None,
                             svf_beta=args.svf_beta)
        _warn_on_weights(beta)
        t0 = time.perf_counter()
        rep = solve(f, beta, config)
        runs.append((name, rep, {"alpha": alpha,
                                 "beta": ",".join(f"{b:g}" for b in beta.betas)},
                     time.perf_counter() - t0))
    return runs


def cmd_compare(args) -> int:
    f, truth = _resolve_input(args)
    names = [m.strip() for m in args.models.split(",") if m.strip()]
    known = set(models.preset_names())
    for name in names:
        if name not in known:
            raise CliError(f"unknown model {name!r}; known: {sorted(known)}")
    if not args.alpha > 0:
        raise CliError(f"--alpha must be > 0, got {args.alpha}")
    if args.discretization == "both" and "tgv" not in names:
        raise CliError("--discretization both only applies to the tgv model")
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _solver_config(args)

    rows = []
    panel = []
    for name in names:
        for label, rep, params, seconds in _compare_single(name, f, args, config):
            u = np.clip(rep.u, 0.0, 1.0)
            save_image(u, out_dir / f"{label}.png")
            row = {"model": label, "iters": rep.iterations, "seconds": f"{seconds:.3f}",
                   "converged": int(rep.converged), **params}
            if truth is not None:
                q = metrics.quality(u, truth)
                row.update(ssim=q.ssim, psnr=q.psnr, rel_error=q.rel_error)
                diff = np.abs(u - truth)
                top = diff.max()
                save_image(diff / top if top > 0 else diff, out_dir / f"{label}_diff.png")
                panel.append((label, u, q.ssim))
            else:
                panel.append((label, u, None))
            rows.append(row)

    if truth is not None:
        rows.sort(key=lambda r: -r["ssim"])
    header = ["model", "alpha", "alpha1", "alpha0", "beta", "discretization",
              "ssim", "psnr", "rel_error", "iters", "seconds", "converged"]
    with open(out_dir / "compare.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, extrasaction="ignore", restval="")
        writer.writeheader()
        writer.writerows(rows)
    for row in rows:
        cells = [f"{row['model']:<18}"]
        if "ssim" in row:
            cells.append(f"ssim={row['ssim']:.4f} psnr={row['psnr']:.2f} rel={row['rel_error']:.4f}")
        cells.append(f"iters={row['iters']}")
        print("  ".join(cells))
    if args.figures:
        noisy_panel = f if args.noise_var is not None else None
        figures.save_compare_figure(panel, truth, noisy_panel, out_dir / "compare.png")
    write_provenance(out_dir / "compare.prov.txt", _provenance_base(args))
    return EXIT_OK


# sweep

def cmd_sweep(args) -> int:
    if (args.input is None) == (args.synth is None):
        raise CliError("exactly one of --input or --synth is required")
    image = SyntheticSpec(args.synth, args.size) if args.synth else args.input
    alphas = _parse_floats(args.alphas, name="--alphas")
    default_grid = _parse_floats(args.beta_grid, name="--beta-grid")
    grids = []
    for i in (1, 2, 3, 4):
        txt = getattr(args, f"beta{i}_grid")
        grids.append(_parse_floats(txt, name=f"--beta{i}-grid") if txt else list(default_grid))
    plan = SweepPlan(
        alphas=alphas,
        beta_grid=tuple(grids),
        image=image,
        noise=NoiseSpec(0.0, args.noise_var if args.noise_var is not None else 0.05, args.seed),
        solver=_solver_config(args),
        output_dir=args.output_dir,
    )
    n_total = len(plan.combinations())
    done = [0]

    def progress(rec):
        done[0] += 1
        if done[0] % max(1, n_total // 20) == 0 or done[0] == n_total:
            print(f"  {done[0]} runs written (last: alpha={rec.alpha:g} "
                  f"pattern={rec.pattern} ssim={rec.ssim:.4f})")

    print(f"sweep: {n_total} combinations -> {plan.output_dir}")
    records = run_sweep(plan, jobs=args.jobs, progress=progress)
    out_dir = Path(args.output_dir)
    if args.hist_bins:
        edges = _parse_floats(args.hist_bins, name="--hist-bins")
        for measure in ("ssim", "psnr", "rel"):
            rows = classify_and_bin(records, measure, edges)
            write_histogram_csv(rows, out_dir / f"histogram_{measure}.csv")
            if args.figures:
                figures.save_histogram_figure(rows, measure, out_dir / f"histogram_{measure}.png")
    write_provenance(out_dir / "sweep.prov.txt", _provenance_base(args))
    print(f"{len(records)} records in {out_dir / 'sweep.csv'}")
    return EXIT_OK


# check-ops

def cmd_check_ops(args) -> int:
    n, trials, seed = args.size, args.trials, args.seed
    if n < 2 or trials < 1:
        raise CliError("need --size >= 2 and --trials >= 1")
    rng = np.random.default_rng(seed)
    pairs = [
        ("grad", diffops.grad, diffops.grad_adjoint, (n, n), (2, n, n)),
        ("div", diffops.div, diffops.div_adjoint, (2, n, n), (n, n)),
        ("curl", diffops.curl, diffops.curl_adjoint, (2, n, n), (n, n)),
        ("shear1", diffops.shear1, diffops.shear1_adjoint, (2, n, n), (n, n)),
        ("shear2", diffops.shear2, diffops.shear2_adjoint, (2, n, n), (n, n)),
    ]
    ok = True
    print(f"adjointness, {trials} random probes at {n}x{n} (relative residual <= 1e-10):")
    for name, op, adj, xs, ys in pairs:
        worst = 0.0
        for _ in range(trials):
            x = rng.standard_normal(xs)
            y = rng.standard_normal(ys)
            scale = np.linalg.norm(x) * np.linalg.norm(y)
            worst = max(worst, abs(inner_product(op(x), y) - inner_product(x, adj(y))) / scale)
        ok &= worst <= 1e-10
        print(f"  {name:<7} max residual {worst:.3e}")
    for variant in (DiscretizationVariant.CONSERVATION_PRESERVING,
                    DiscretizationVariant.BREDIES_REFERENCE):
        worst = 0.0
        for _ in range(trials):
            w = rng.standard_normal((2, n, n))
            g = rng.standard_normal((3, n, n))
            scale = np.linalg.norm(w) * np.linalg.norm(g)
            worst = max(worst, abs(inner_product(diffops.sym_grad(w, variant), g)
                                   - inner_product(w, diffops.sym_grad_adjoint(g, variant))) / scale)
        ok &= worst <= 1e-10
        print(f"  sym_grad[{variant.value}] max residual {worst:.3e}")

    variant = (DiscretizationVariant.BREDIES_REFERENCE if args.variant == "bredies"
               else DiscretizationVariant.CONSERVATION_PRESERVING)
    rep = diffops.check_conservation(n, trials=trials, rng_seed=seed, variant=variant)
    if variant is DiscretizationVariant.CONSERVATION_PRESERVING:
        print(f"conservation identities (absolute residual <= 1e-12 for [0,1] inputs):")
        for label, value in rep.rows():
            print(f"  {label:<13} max residual {value:.3e}")
        ok &= rep.max_residual() <= 1e-12
        print("all identities hold" if ok else "IDENTITY VIOLATED")
        return EXIT_OK if ok else EXIT_IDENTITY
    print("counterexample mode (all-backward curl/shear; nonzero residuals expected):")
    for label, value in rep.rows():
        print(f"  {label:<13} max residual {value:.3e}")
    return EXIT_OK if ok else EXIT_IDENTITY


# synth

def cmd_synth(args) -> int:
    truth = synthesize(SyntheticSpec(args.kind, args.size))
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    field = truth
    if args.noise_var is not None:
        field = add_gaussian_noise(truth, NoiseSpec(0.0, args.noise_var, args.seed))
    save_image(field, out, bit_depth=args.bit_depth)
    if args.sidecar:
        save_field_raw(field, out.with_suffix(out.suffix + ".vosfld"))
    write_provenance(out.with_suffix(out.suffix + ".prov.txt"), _provenance_base(args))
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vos",
        description="Variational image denoising with a joint vector-operator sparsity regularizer.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise one image")
    _add_input_flags(p)
    _add_solver_flags(p)
    p.add_argument("--alpha", type=float, required=True, help="regularization weight")
    p.add_argument("--model", choices=models.preset_names(), help="named weight preset")
    p.add_argument("--beta", help="custom weights b1,b2,b3,b4 (squared weights)")
    p.add_argument("--svf-beta", type=float, default=None, help="divergence weight for --model svf")
    p.add_argument("--output", required=True, help="output image path (.pgm/.png)")
    p.add_argument("--log", help="write per-iteration CSV log here")
    p.add_argument("--sidecar", action="store_true", help="also write the raw float sidecar")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                   help="render companion figures (default on)")
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("compare", help="run several models on the same input")
    _add_input_flags(p)
    _add_solver_flags(p)
    p.add_argument("--models", required=True, help="comma list, e.g. tv,ictv,tgv,vos")
    p.add_argument("--alpha", type=float, default=0.25, help="regularization weight (default 0.25)")
    p.add_argument("--beta", help="weights for the vos model: b1,b2,b3,b4")
    p.add_argument("--svf-beta", type=float, default=None, help="divergence weight for svf")
    p.add_argument("--tgv-ratio", type=float, default=1.0,
                   help="alpha0/alpha1 ratio for the direct tgv solver (default 1)")
    p.add_argument("--discretization", choices=("conservation", "bredies", "both"),
                   default="conservation", help="tgv discretization variant")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="parameter-grid experiment")
    _add_input_flags(p)
    _add_solver_flags(p)
    p.add_argument("--alphas", required=True, help="comma list of alpha values")
    p.add_argument("--beta-grid", required=True, help="comma list used for every beta_i")
    for i in (1, 2, 3, 4):
        p.add_argument(f"--beta{i}-grid", default=None, help=f"override grid for beta{i}")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (default 1)")
    p.add_argument("--hist-bins", default=None, help="histogram bin edges, comma list")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-ops", help="verify adjointness and conservation identities")
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=("conservation", "bredies"), default="conservation")
    p.set_defaults(func=cmd_check_ops)

    p = sub.add_parser("synth", help="write a synthetic test image")
    p.add_argument("--kind", choices=[k.value for k in SyntheticKind], required=True)
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--noise-var", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    p.add_argument("--output", required=True)
    p.add_argument("--sidecar", action="store_true")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ImageFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
