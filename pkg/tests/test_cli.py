import csv

import numpy as np
import pytest

from vosdenoise.cli import main
from vosdenoise.imaging import load_field_raw, load_image


def run(args):
    return main(args)


def test_denoise_synthetic_end_to_end(tmp_path, capsys):
    out = tmp_path / "den.png"
    log = tmp_path / "iters.csv"
    code = run(["denoise", "--synth", "affine", "--size", "64", "--noise-var", "0.05",
                "--seed", "7", "--model", "tgv", "--alpha", "0.3333",
                "--max-iters", "800", "--output", str(out), "--log", str(log),
                "--sidecar"])
    captured = capsys.readouterr()
    assert code == 0
    assert out.exists()
    assert "ssim=" in captured.out
    assert (tmp_path / "den.png.prov.txt").exists()
    assert (tmp_path / "den.png.vosfld").exists()
    assert log.exists()
    assert log.with_suffix(".png").exists()  # convergence figure
    with open(log) as fh:
        header = fh.readline().strip()
    assert header == "iter,total,fidelity,coupling,operator,primal_res,dual_res,tau,sigma"


def test_denoise_rejects_alpha_zero(tmp_path):
    code = run(["denoise", "--synth", "affine", "--size", "16", "--model", "tgv",
                "--alpha", "0", "--output", str(tmp_path / "x.png")])
    assert code == 2


def test_denoise_requires_exactly_one_input(tmp_path):
    code = run(["denoise", "--model", "tgv", "--alpha", "0.25",
                "--output", str(tmp_path / "x.png")])
    assert code == 2


def test_denoise_single_operator_warning(tmp_path, capsys):
    code = run(["denoise", "--synth", "square", "--size", "32", "--beta", "0,0,0,1",
                "--alpha", "0.25", "--max-iters", "100", "--no-figures",
                "--output", str(tmp_path / "y.png")])
    captured = capsys.readouterr()
    assert code == 0
    assert "parallel to the coordinate axes" in captured.err


def test_denoise_missing_input_is_io_error(tmp_path):
    code = run(["denoise", "--input", str(tmp_path / "none.png"), "--model", "tgv",
                "--alpha", "0.25", "--output", str(tmp_path / "x.png")])
    assert code == 3


def test_denoise_reproducible_sidecar(tmp_path):
    args = ["denoise", "--synth", "square", "--size", "32", "--noise-var", "0.02",
            "--seed", "5", "--model", "tgv", "--alpha", "0.25", "--max-iters", "150",
            "--sidecar", "--no-figures"]
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    assert run(args + ["--output", str(a)]) == 0
    assert run(args + ["--output", str(b)]) == 0
    assert (tmp_path / "a.png.vosfld").read_bytes()[16:] == \
           (tmp_path / "b.png.vosfld").read_bytes()[16:]


def test_compare_models_table_and_images(tmp_path, capsys):
    out = tmp_path / "cmp"
    code = run(["compare", "--synth", "square", "--size", "48", "--noise-var", "0.05",
                "--seed", "3", "--models", "tv,tgv,vos", "--alpha", "0.4",
                "--tgv-ratio", "4", "--beta", "0,8,8,8", "--max-iters", "600",
                "--output-dir", str(out)])
    assert code == 0
    table = out / "compare.csv"
    assert table.exists()
    with open(table) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["model"] for r in rows} == {"tv", "tgv", "vos"}
    ssims = [float(r["ssim"]) for r in rows]
    assert ssims == sorted(ssims, reverse=True)  # sorted by ssim
    for name in ("tv", "tgv", "vos"):
        assert (out / f"{name}.png").exists()
        assert (out / f"{name}_diff.png").exists()
    assert (out / "compare.png").exists()
    assert (out / "compare.prov.txt").exists()


def test_compare_discretization_both(tmp_path):
    out = tmp_path / "cmp2"
    code = run(["compare", "--synth", "square", "--size", "48", "--noise-var", "0.05",
                "--seed", "3", "--models", "tgv", "--alpha", "0.4", "--tgv-ratio", "4",
                "--discretization", "both", "--max-iters", "500", "--no-figures",
                "--output-dir", str(out)])
    assert code == 0
    with open(out / "compare.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["model"] for r in rows} == {"tgv-conservation", "tgv-bredies"}
    ssims = {r["model"]: float(r["ssim"]) for r in rows}
    assert abs(ssims["tgv-conservation"] - ssims["tgv-bredies"]) <= 0.01


def test_compare_unknown_model(tmp_path):
    code = run(["compare", "--synth", "square", "--size", "32", "--models", "tv,bogus",
                "--output-dir", str(tmp_path / "x")])
    assert code == 2


def test_sweep_command_with_histograms(tmp_path):
    out = tmp_path / "sw"
    code = run(["sweep", "--synth", "square", "--size", "24", "--noise-var", "0.02",
                "--seed", "1", "--alphas", "0.25", "--beta-grid", "0,0.5",
                "--max-iters", "80", "--hist-bins", "0,0.5,0.8,1.0",
                "--output-dir", str(out)])
    assert code == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 16
    for measure in ("ssim", "psnr", "rel"):
        assert (out / f"histogram_{measure}.csv").exists()
        assert (out / f"histogram_{measure}.png").exists()
    assert (out / "sweep.prov.txt").exists()


def test_check_ops_default_passes(capsys):
    code = run(["check-ops", "--size", "16", "--trials", "5", "--seed", "2"])
    captured = capsys.readouterr()
    assert code == 0
    assert "all identities hold" in captured.out


def test_check_ops_minimal_grid():
    assert run(["check-ops", "--size", "2", "--trials", "3"]) == 0


def test_check_ops_bredies_counterexample(capsys):
    code = run(["check-ops", "--size", "32", "--trials", "3", "--variant", "bredies"])
    captured = capsys.readouterr()
    assert code == 0
    assert "counterexample" in captured.out
    # residual lines show nonzero values
    lines = [l for l in captured.out.splitlines() if "curl(grad u)" in l]
    assert lines and float(lines[0].split()[-1]) > 1e-3


def test_synth_command_with_noise_and_sidecar(tmp_path):
    out = tmp_path / "img.pgm"
    code = run(["synth", "--kind", "square", "--size", "32", "--noise-var", "0.05",
                "--seed", "9", "--sidecar", "--output", str(out)])
    assert code == 0
    img = load_image(out)
    assert img.shape == (32, 32)
    raw = load_field_raw(tmp_path / "img.pgm.vosfld")
    assert raw.shape == (32, 32)
    # sidecar keeps unclamped values; quantized image clips them
    assert raw.min() < 0 or raw.max() > 1
    assert (tmp_path / "img.pgm.prov.txt").exists()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
