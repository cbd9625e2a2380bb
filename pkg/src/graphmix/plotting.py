"""Matplotlib figures written next to the CSV/SVG outputs.

Uses the Agg backend and strips timestamps from metadata so reruns produce
identical PNG bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import LIGHT, PALETTE  # noqa: E402

_RC = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
}
_META = {"Software": None}


def _save(fig, path):
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def plot_sweep(ratios, series, path, title=""):
    """Accuracy against train ratio; ``series[model]`` holds (mean, std) pairs."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.4))
        for k, name in enumerate(sorted(series)):
            m = np.array([v[0] for v in series[name]])
            s = np.array([v[1] for v in series[name]])
            ax.plot(ratios, m, marker="o", ms=3, color=PALETTE[k % len(PALETTE)], label=name)
            ax.fill_between(ratios, m - s, m + s, color=PALETTE[k % len(PALETTE)], alpha=0.15, lw=0)
        ax.set_xlabel("train ratio")
        ax.set_ylabel("test accuracy (%)")
        ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def plot_curves(record, path, title=""):
    """Train loss and train/val/test accuracy per epoch; selected epoch marked."""
    with plt.rc_context(_RC):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.2))
        ep = np.arange(len(record.train_loss))
        a1.plot(ep, record.train_loss, color=PALETTE[0])
        a1.set_xlabel("epoch")
        a1.set_ylabel("train loss")
        for k, (name, vals) in enumerate((("train", record.train_acc), ("val", record.val_acc),
                                          ("test", record.test_acc))):
            a2.plot(ep, vals, color=PALETTE[k], label=name)
        a2.axvline(record.selected_epoch, color="#555555", ls=":", lw=1)
        a2.set_xlabel("epoch")
        a2.set_ylabel("accuracy")
        a2.legend(frameon=False)
        fig.suptitle(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_boundary(grid, path, title=""):
    """Class regions of a BoundaryGrid; hollow markers raw, filled markers aggregated."""
    from matplotlib.colors import ListedColormap

    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.2, 4.2))
        k = int(grid.classes.max()) + 1
        xmin, xmax, ymin, ymax = grid.box
        ax.imshow(grid.classes, origin="lower", extent=grid.box, aspect="auto",
                  cmap=ListedColormap(LIGHT[:max(k, 2)]), interpolation="nearest")
        colors = [PALETTE[int(c) % len(PALETTE)] for c in grid.node_classes]
        ax.scatter(grid.positions_before[:, 0], grid.positions_before[:, 1], s=14,
                   facecolors="none", edgecolors=colors, linewidths=0.8, label="raw")
        ax.scatter(grid.positions_after[:, 0], grid.positions_after[:, 1], s=10, c=colors,
                   label="aggregated")
        ax.set_xlim(xmin, xmax)
        ax.set_ylim(ymin, ymax)
        ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)
