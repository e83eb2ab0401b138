"""Static figures for run traces and study convergence (Agg backend, files only)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_trace(trace: list, path, f_star: Optional[float] = None, title: str = "") -> Path:
    """Incumbent true value and sample mean against cumulative evaluations."""
    evals = [row["evals"] for row in trace]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(evals, [row["true_f"] for row in trace], marker="o", label="true f at incumbent")
    ax.plot(evals, [row["incumbent_mean"] for row in trace], marker=".", ls="--", label="incumbent sample mean")
    if f_star is not None:
        ax.axhline(f_star, color="k", lw=0.8, ls=":", label="optimum")
    ax.set_xlabel("evaluations")
    ax.set_ylabel("objective")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_convergence_quantiles(rows: list, path, f_star: Optional[float] = None) -> Path:
    """Median incumbent value per variant with a shaded 25-75 % band."""
    by_variant = defaultdict(list)
    for row in rows:
        by_variant[row["variant"]].append(row)
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, rs in by_variant.items():
        x = [r["evals"] for r in rs]
        line, = ax.plot(x, [r["q50"] for r in rs], label=name)
        ax.fill_between(x, [r["q25"] for r in rs], [r["q75"] for r in rs], color=line.get_color(), alpha=0.2)
    if f_star is not None:
        ax.axhline(f_star, color="k", lw=0.8, ls=":")
    ax.set_xlabel("evaluations")
    ax.set_ylabel("true f at incumbent")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
