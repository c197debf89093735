"""SVG line plots for ROC curves and window-size sweeps."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp so repeated runs give identical files
plt.rcParams["svg.hashsalt"] = "evfb"
_META = {"Date": None, "Creator": None}


def _save(fig, path) -> None:
    fig.savefig(Path(path), format="svg", metadata=_META)
    plt.close(fig)


def plot_roc(reports, path, title: str = "ROC") -> None:
    """One curve per RocReport, points sorted by FPR."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for r in reports:
        pts = sorted((p.fpr, p.tpr) for p in r.points if p.fpr == p.fpr and p.tpr == p.tpr)
        xs = [0.0] + [a for a, _ in pts] + [1.0]
        ys = [0.0] + [b for _, b in pts] + [1.0]
        ax.plot(xs, ys, marker=".", label=f"{r.name} (AUC {r.auc:.3f})")
    ax.plot([0, 1], [0, 1], ls=":", color="grey")
    ax.set(xlabel="FPR", ylabel="TPR", xlim=(0, 1), ylim=(0, 1.01), title=title)
    ax.legend(loc="lower right", fontsize="small")
    _save(fig, path)


def plot_window_sweep(rows_by_algo: dict, path, title: str = "Window size") -> None:
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 4))
    for name, rows in rows_by_algo.items():
        sizes = [r.size for r in rows]
        a1.plot(sizes, [r.sr for r in rows], marker=".", label=name)
        a2.plot(sizes, [r.nr for r in rows], marker=".", label=name)
    a1.set(xlabel="window (s)", ylabel="SR (%)", title=title)
    a2.set(xlabel="window (s)", ylabel="NR (%)")
    a1.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)
