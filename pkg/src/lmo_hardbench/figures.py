"""Figure rendering for the report path.

Figures are a convenience companion to the delimited output: the CSV stays
the canonical interface and nothing downstream depends on the images.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def render_trajectory_figure(traj, path: str, bound_curve=None) -> str:
    """Semilog plot of the realized gap per iteration, with the certified
    floor overlaid when available."""
    plt = _plt()
    ks = [r.k for r in traj.records]
    gaps = [r.gap for r in traj.records]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(ks, gaps, marker="o", label=f"{traj.method.variant} gap")
    if bound_curve is not None:
        bks, bvals = bound_curve
        positive = [(k, v) for k, v in zip(bks, bvals) if v > 0]
        if positive:
            ax.semilogy(*zip(*positive), linestyle="--", label="certified floor")
    ax.set_xlabel("iteration k")
    ax.set_ylabel("objective gap")
    ax.set_title(traj.problem.label)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_sweep_figure(rows: list[dict], path: str) -> str:
    """Gap and bound per budget, one line pair per method."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    methods = sorted({row["method"] for row in rows})
    for name in methods:
        pts = sorted(
            [(row["T"], row["gap"], row["bound"]) for row in rows if row["method"] == name]
        )
        Ts = [p[0] for p in pts]
        ax.semilogy(Ts, [p[1] for p in pts], marker="o", label=f"{name} gap")
        bounds = [(T, b) for T, _, b in pts if b > 0]
        if bounds:
            ax.semilogy(*zip(*bounds), linestyle="--", alpha=0.7,
                        label=f"{name} bound")
    ax.set_xlabel("iteration budget T")
    ax.set_ylabel("objective gap")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
