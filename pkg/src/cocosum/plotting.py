"""Figures written next to the delimited outputs of ``train`` and ``evaluate``."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}
# PNG metadata would otherwise carry the matplotlib version
_META = {"Software": None}


def plot_loss_curve(history: Sequence, path: str | Path, title: str = "training loss") -> Path:
    """Per-epoch train (and validation, when present) loss on a log scale."""
    path = Path(path)
    epochs = [r.epoch for r in history]
    train = [r.train_loss for r in history]
    valid = [(r.epoch, r.valid_loss) for r in history if r.valid_loss is not None]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        ax.plot(epochs, train, marker="o", ms=3, lw=1.2, label="train")
        if valid:
            ax.plot(*zip(*valid), marker="s", ms=3, lw=1.2, label="valid")
        if train and min(train) > 0:
            ax.set_yscale("log")
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean NLL per token")
        ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata=_META)
        plt.close(fig)
    return path


def plot_scores(per_sample: dict[str, list[float]], path: str | Path) -> Path:
    """One histogram per metric of the per-sample scores."""
    path = Path(path)
    names = list(per_sample)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(names), figsize=(2.4 * len(names), 2.6), squeeze=False)
        for ax, name in zip(axes[0], names):
            vals = per_sample[name]
            hi = 10.0 if name == "CIDER" else 1.0
            ax.hist(vals, bins=10, range=(0.0, hi), color="0.35", edgecolor="white")
            mean = sum(vals) / len(vals) if vals else 0.0
            ax.axvline(mean, color="C3", lw=1.0)
            ax.set_title(f"{name} (mean {mean:.3f})")
            ax.set_xlabel("score")
        axes[0][0].set_ylabel("samples")
        fig.tight_layout()
        fig.savefig(path, metadata=_META)
        plt.close(fig)
    return path
