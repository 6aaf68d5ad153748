"""Matplotlib rendering of ASRD histograms (SVG, reproducible bytes)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "lsre", "svg.fonttype": "none"}


def _bars(ax, report, label, offset=0.0, width=1.0, color=None):
    edges = report.bin_edges
    frac = report.histogram / max(1, report.histogram.sum())
    step = edges[1] - edges[0]
    left = edges[:-1] + offset * step
    ax.bar(left, frac, width=width * step, align="edge", label=label, color=color, edgecolor="black", lw=0.4)


def _finish(ax, title):
    ax.set_xlim(0, 1)
    ax.set_xlabel("success rate")
    ax.set_ylabel("fraction of (instance, optimizer) pairs")
    ax.set_title(title)


def histogram_svg(report, path, label="benchmark"):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        _bars(ax, report, label)
        N, M = report.success_rates.shape
        _finish(ax, f"ASRD: {label} ({N} instances x {M} optimizers)")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def comparison_svg(reports: dict, path):
    """Side-by-side panels, one per labelled report, sharing the y axis."""
    labels = list(reports)
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, len(labels), figsize=(4.5 * len(labels), 3.5), sharey=True)
        for ax, lab in zip(np.atleast_1d(axes), labels):
            rep = reports[lab]
            _bars(ax, rep, lab)
            _finish(ax, f"{lab}: {rep.nonempty_bins()} non-empty bins")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
