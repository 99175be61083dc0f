"""Figures written next to the text reports: loss curves and system comparisons."""
from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG bytes stable across runs
_SAVE_KW = {"dpi": 120, "metadata": {"Software": None}}

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def plot_training_curve(train_log, path, title: str = "training loss") -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        steps = np.arange(1, len(train_log.step_losses) + 1)
        if len(steps):
            ax.plot(steps, train_log.step_losses, lw=0.8, alpha=0.45, color="tab:blue", label="batch")
        ends = np.cumsum([r.steps for r in train_log.records])
        if len(ends):
            ax.plot(ends, [r.loss for r in train_log.records], "o-", ms=3, color="tab:red", label="epoch mean")
        dev = [(e, r.dev_f1) for e, r in zip(ends, train_log.records) if r.dev_f1 is not None]
        if dev:
            twin = ax.twinx()
            twin.plot(*zip(*dev), "s--", ms=3, color="tab:green", label="dev macro-F1")
            twin.set_ylim(0, 1.05)
            twin.set_ylabel("dev macro-F1")
        ax.set_xlabel("optimizer step")
        ax.set_ylabel("loss")
        ax.set_title(title)
        ax.legend(loc="upper right")
        fig.tight_layout()
        fig.savefig(path, **_SAVE_KW)
        plt.close(fig)


def plot_system_comparison(names: Sequence[str], reports, path) -> None:
    """Macro-F1 bars per system plus one confusion matrix per system."""
    n = len(names)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, n + 1, figsize=(3.2 * (n + 1), 3.0), squeeze=False)
        axes = axes[0]
        scores = [r.macro_f1 for r in reports]
        bars = axes[0].bar(range(n), scores, color="tab:blue")
        for bar, s in zip(bars, scores):
            axes[0].text(bar.get_x() + bar.get_width() / 2, s + 0.02, f"{s:.3f}", ha="center", fontsize=8)
        axes[0].set_xticks(range(n))
        axes[0].set_xticklabels(names, rotation=20, ha="right")
        axes[0].set_ylim(0, 1.1)
        axes[0].set_ylabel("macro-F1")
        axes[0].set_title("sentiment")
        for ax, name, rep in zip(axes[1:], names, reports):
            counts = np.asarray(rep.confusion)
            ax.imshow(counts, cmap="Blues")
            for (i, j), c in np.ndenumerate(counts):
                ax.text(j, i, str(c), ha="center", va="center", fontsize=8)
            ax.set_xticks(range(len(rep.labels)))
            ax.set_yticks(range(len(rep.labels)))
            ax.set_xticklabels([l[:3] for l in rep.labels])
            ax.set_yticklabels([l[:3] for l in rep.labels])
            ax.set_xlabel("predicted")
            ax.set_ylabel("gold")
            ax.set_title(name)
        fig.tight_layout()
        fig.savefig(path, **_SAVE_KW)
        plt.close(fig)
