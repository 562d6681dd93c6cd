"""Matplotlib figure rendering for the CLI report paths.

Figures are companions to the delimited outputs (iteration logs, metric
tables, histogram CSVs); the CSVs stay the canonical record.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CLASS_LABELS = {
    0: "all weights active",
    1: "one weight zero",
    2: "two weights zero",
    3: "three weights zero",
    4: "all weights zero",
}


def save_convergence_figure(report, path) -> None:
    """Energy terms and residuals over the logged iterations."""
    rows = report.log
    it = [r.iteration for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].plot(it, [r.total for r in rows], label="total")
    axes[0].plot(it, [r.fidelity for r in rows], label="fidelity")
    axes[0].plot(it, [r.coupling for r in rows], label="coupling")
    axes[0].plot(it, [r.operator_term for r in rows], label="operator")
    axes[0].set_xlabel("iteration")
    axes[0].set_ylabel("energy")
    axes[0].legend(fontsize=8)
    axes[1].semilogy(it, [max(r.primal_residual, 1e-300) for r in rows], label="primal")
    axes[1].semilogy(it, [max(r.dual_residual, 1e-300) for r in rows], label="dual")
    axes[1].set_xlabel("iteration")
    axes[1].set_ylabel("residual")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def save_compare_figure(entries, truth, noisy, path) -> None:
    """Panel of reconstructions with their SSIM values.

    entries: list of (label, image, ssim_value); truth/noisy may be None.
    """
    panels = []
    if truth is not None:
        panels.append(("ground truth", truth, None))
    if noisy is not None:
        panels.append(("noisy input", noisy, None))
    panels.extend(entries)
    cols = min(3, len(panels))
    rows = (len(panels) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.4 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.axis("off")
    for ax, (label, img, s) in zip(axes.ravel(), panels):
        ax.imshow(np.clip(img, 0.0, 1.0), cmap="gray", vmin=0.0, vmax=1.0)
        title = label if s is None else f"{label}\nSSIM {s:.4f}"
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def save_histogram_figure(hist_rows, measure: str, path) -> None:
    """Grouped bar chart of per-class counts over the given bins."""
    classes = sorted({cls for cls, _, _, _ in hist_rows})
    bins = sorted({(lo, hi) for _, lo, hi, _ in hist_rows})
    counts = {(cls, lo, hi): c for cls, lo, hi, c in hist_rows}
    x = np.arange(len(bins))
    width = 0.8 / max(len(classes), 1)
    fig, ax = plt.subplots(figsize=(1.6 * len(bins) + 2, 4))
    for k, cls in enumerate(classes):
        heights = [counts.get((cls, lo, hi), 0) for lo, hi in bins]
        ax.bar(x + k * width, heights, width, label=CLASS_LABELS.get(cls, str(cls)))
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([f"[{lo:.3g},{hi:.3g})" for lo, hi in bins], rotation=30, fontsize=8)
    ax.set_xlabel(measure)
    ax.set_ylabel("runs")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)
