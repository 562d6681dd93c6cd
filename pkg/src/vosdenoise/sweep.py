"""Parameter-grid experiment harness.

Runs the solver over an (alpha, beta1..beta4) grid against one noisy
realization of a source image, records quality metrics per combination, and
streams records to CSV so interrupted sweeps resume (existing parameter keys
are skipped). Records are keyed by their parameters, so output is independent
of execution order and worker count.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .imaging import NoiseSpec, SyntheticSpec, add_gaussian_noise, load_image, synthesize
from .metrics import psnr, rel_error, ssim
from .regularizer import BetaVector
from .solver import DivergenceError, SolverConfig, solve

RECORD_HEADER = ("alpha", "beta1", "beta2", "beta3", "beta4", "zeros", "pattern",
                 "ssim", "psnr", "rel_error", "iters", "seconds", "converged")
HISTOGRAM_HEADER = ("class", "bin_lo", "bin_hi", "count")
SWEEP_CSV = "sweep.csv"


@dataclass
class SweepPlan:
    alphas: list[float]
    beta_grid: tuple[list[float], list[float], list[float], list[float]]
    image: SyntheticSpec | str | Path
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: Path | str = "."

    def __post_init__(self):
        if not self.alphas:
            raise ValueError("alphas must be nonempty")
        if len(self.beta_grid) != 4 or any(not g for g in self.beta_grid):
            raise ValueError("beta_grid needs four nonempty value lists")

    def combinations(self) -> list[tuple[float, float, float, float, float]]:
        return [(a, b1, b2, b3, b4)
                for a, b1, b2, b3, b4 in product(self.alphas, *self.beta_grid)]

    def source_image(self) -> np.ndarray:
        if isinstance(self.image, SyntheticSpec):
            return synthesize(self.image)
        return load_image(self.image)


@dataclass(frozen=True)
class SweepRecord:
    alpha: float
    beta1: float
    beta2: float
    beta3: float
    beta4: float
    zeros: int
    pattern: str
    ssim: float
    psnr: float
    rel_error: float
    iters: int
    seconds: float
    converged: bool

    @property
    def key(self) -> tuple[str, ...]:
        return _param_key(self.alpha, (self.beta1, self.beta2, self.beta3, self.beta4))

    def row(self) -> list:
        return [f"{self.alpha:.12g}", f"{self.beta1:.12g}", f"{self.beta2:.12g}",
                f"{self.beta3:.12g}", f"{self.beta4:.12g}", self.zeros, self.pattern,
                f"{self.ssim:.8g}", f"{self.psnr:.8g}", f"{self.rel_error:.8g}",
                self.iters, f"{self.seconds:.3f}", int(self.converged)]


def _param_key(alpha, betas) -> tuple[str, ...]:
    return tuple(f"{v:.12g}" for v in (alpha, *betas))


def _pattern(betas) -> str:
    return "".join("1" if b > 0 else "0" for b in betas)


def _run_combo(task) -> SweepRecord:
    noisy, truth, alpha, betas, config = task
    beta = BetaVector(*betas, alpha=alpha)
    t0 = time.perf_counter()
    try:
        rep = solve(noisy, beta, config)
        rec = SweepRecord(
            alpha=alpha, beta1=betas[0], beta2=betas[1], beta3=betas[2], beta4=betas[3],
            zeros=beta.zero_count, pattern=_pattern(betas),
            ssim=ssim(rep.u, truth), psnr=psnr(rep.u, truth),
            rel_error=rel_error(rep.u, truth),
            iters=rep.iterations, seconds=time.perf_counter() - t0,
            converged=rep.converged)
    except DivergenceError:
        rec = SweepRecord(
            alpha=alpha, beta1=betas[0], beta2=betas[1], beta3=betas[2], beta4=betas[3],
            zeros=4 - sum(1 for b in betas if b > 0), pattern=_pattern(betas),
            ssim=math.nan, psnr=math.nan, rel_error=math.nan,
            iters=0, seconds=time.perf_counter() - t0, converged=False)
    return rec


def load_records(csv_path) -> list[SweepRecord]:
    path = Path(csv_path)
    if not path.exists():
        return []
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(SweepRecord(
                alpha=float(row["alpha"]), beta1=float(row["beta1"]),
                beta2=float(row["beta2"]), beta3=float(row["beta3"]),
                beta4=float(row["beta4"]), zeros=int(row["zeros"]),
                pattern=row["pattern"], ssim=float(row["ssim"]),
                psnr=float(row["psnr"]), rel_error=float(row["rel_error"]),
                iters=int(row["iters"]), seconds=float(row["seconds"]),
                converged=bool(int(row["converged"]))))
    return out


def run_sweep(plan: SweepPlan, jobs: int = 1, progress=None) -> list[SweepRecord]:
    """Run (or resume) the sweep; returns all records including prior ones."""
    out_dir = Path(plan.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / SWEEP_CSV
    existing = load_records(csv_path)
    done = {r.key for r in existing}

    truth = plan.source_image()
    noisy = add_gaussian_noise(truth, plan.noise)
    todo = [combo for combo in plan.combinations()
            if _param_key(combo[0], combo[1:]) not in done]

    new_file = not csv_path.exists()
    records = list(existing)
    with open(csv_path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(RECORD_HEADER)
            fh.flush()

        def emit(rec: SweepRecord):
            writer.writerow(rec.row())
            fh.flush()
            records.append(rec)
            if progress is not None:
                progress(rec)

        tasks = [(noisy, truth, combo[0], tuple(combo[1:]), plan.solver) for combo in todo]
        if jobs <= 1:
            for task in tasks:
                emit(_run_combo(task))
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = [pool.submit(_run_combo, t) for t in tasks]
                for fut in as_completed(futures):
                    emit(fut.result())
    records.sort(key=lambda r: r.key)
    return records


def classify_and_bin(records: list[SweepRecord], measure: str,
                     bin_edges: list[float]) -> list[tuple[int, float, float, int]]:
    """Histogram counts per zero-pattern class.

    measure is one of 'ssim', 'psnr', 'rel'; bins are [lo, hi) from the given
    edges with the final bin closed. Records with non-finite measure values
    (failed runs) are skipped. Returns (class, bin_lo, bin_hi, count) rows.
    """
    if not records:
        raise ValueError("no records to classify")
    if len(bin_edges) < 2 or any(b >= a for a, b in zip(bin_edges[1:], bin_edges[:-1])):
        raise ValueError("bin_edges must be increasing with at least two entries")
    attr = {"ssim": "ssim", "psnr": "psnr", "rel": "rel_error", "rel_error": "rel_error"}
    if measure not in attr:
        raise ValueError(f"unknown measure {measure!r}")
    classes = sorted({r.zeros for r in records})
    rows = []
    for cls in classes:
        values = [getattr(r, attr[measure]) for r in records
                  if r.zeros == cls and math.isfinite(getattr(r, attr[measure]))]
        for lo, hi in zip(bin_edges[:-1], bin_edges[1:]):
            last = hi == bin_edges[-1]
            count = sum(1 for v in values if lo <= v < hi or (last and v == hi))
            rows.append((cls, lo, hi, count))
    return rows


def write_histogram_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTOGRAM_HEADER)
        for cls, lo, hi, count in rows:
            writer.writerow([cls, f"{lo:.8g}", f"{hi:.8g}", count])
