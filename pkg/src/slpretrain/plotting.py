"""Figures for training curves and ablation summaries, rendered to files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_loss_curves(rows: Sequence[Mapping], path: str | Path, title: str = "pre-training") -> Path:
    """Per-epoch reconstruction and contrastive losses on two axes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    epochs = [r["epoch"] for r in rows]
    fig, ax1 = plt.subplots(figsize=(6, 3.5))
    ax1.plot(epochs, [r["pr"] for r in rows], color="tab:blue", label="reconstruction")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("reconstruction loss", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(epochs, [r["stc"] for r in rows], color="tab:orange", label="contrastive")
    ax2.set_ylabel("contrastive loss", color="tab:orange")
    ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_task_curve(rows: Sequence[Mapping], path: str | Path, title: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot([r["epoch"] for r in rows], [r["loss"] for r in rows])
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_ablation(results: Mapping[str, Sequence[float]], path: str | Path, metric: str,
                  title: str = "") -> Path:
    """Bar per variant at the seed mean, with each seed drawn as a dot."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(results)
    means = [float(np.mean(results[n])) for n in names]
    fig, ax = plt.subplots(figsize=(1.2 * len(names) + 2, 3.5))
    x = np.arange(len(names))
    ax.bar(x, means, color="lightsteelblue", edgecolor="k")
    for i, n in enumerate(names):
        vals = results[n]
        ax.scatter(np.full(len(vals), x[i]), vals, color="k", s=12, zorder=3)
    ax.set_xticks(x, names, rotation=20)
    ax.set_ylabel(metric)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
