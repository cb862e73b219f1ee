"""Matplotlib figure rendering for the report path (headless Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalstats import ScoreTable


def roc_points(table: ScoreTable):
    """(fpr, tpr) arrays swept over all score thresholds."""
    scores = table.scores()
    labels = table.labels()
    order = np.argsort(-scores, kind="stable")
    labels = labels[order]
    tps = np.cumsum(labels == 1)
    fps = np.cumsum(labels == 0)
    n_pos = max((labels == 1).sum(), 1)
    n_neg = max((labels == 0).sum(), 1)
    tpr = np.concatenate([[0.0], tps / n_pos])
    fpr = np.concatenate([[0.0], fps / n_neg])
    return fpr, tpr


def save_roc_figure(tables: dict[str, ScoreTable], aucs: dict[str, float], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    for name, table in tables.items():
        fpr, tpr = roc_points(table)
        ax.plot(fpr, tpr, label=f"{name} (AUROC {aucs[name]:.3f})")
    ax.plot([0, 1], [0, 1], "k--", linewidth=0.8)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bench_figure(timings_ms: dict[str, float], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3))
    names = list(timings_ms)
    ax.barh(names, [timings_ms[n] for n in names], color="#4878d0")
    ax.set_xlabel("per-tile wall time (ms)")
    ax.set_xscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
