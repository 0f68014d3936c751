"""Figure rendering for the report paths: loss curves, AP bars, ablations."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_training_curves(log, path):
    """Mean loss per epoch with validation mAP on a twin axis."""
    epochs = [row.epoch for row in log]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(epochs, [row.mean_loss for row in log], marker="o", color="#1f77b4", label="train loss")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean focal loss")
    twin = ax.twinx()
    seen = [row.val_map_seen for row in log]
    unseen = [row.val_map_unseen for row in log]
    if not all(np.isnan(seen)):
        twin.plot(epochs, seen, marker="s", color="#2ca02c", label="val mAP seen")
    if not all(np.isnan(unseen)):
        twin.plot(epochs, unseen, marker="^", color="#d62728", label="val mAP unseen")
    twin.set_ylabel("validation mAP")
    twin.set_ylim(0, 1)
    lines, labels = ax.get_legend_handles_labels()
    lines2, labels2 = twin.get_legend_handles_labels()
    ax.legend(lines + lines2, labels + labels2, loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_category_ap(report, space, split, path):
    """Per-category AP bars, unseen categories highlighted."""
    cats = sorted(report.per_category)
    if not cats:
        return
    names = [space.category_name(c) for c in cats]
    values = [report.per_category[c] for c in cats]
    colors = ["#d62728" if c in split.unseen else "#1f77b4" for c in cats]
    fig, ax = plt.subplots(figsize=(max(5, 0.5 * len(cats)), 3.6))
    ax.bar(range(len(cats)), values, color=colors)
    ax.set_xticks(range(len(cats)))
    ax.set_xticklabels(names, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("AP")
    ax.set_ylim(0, 1)
    handles = [
        plt.Rectangle((0, 0), 1, 1, color="#1f77b4"),
        plt.Rectangle((0, 0), 1, 1, color="#d62728"),
    ]
    ax.legend(handles, ["seen", "unseen"], fontsize=8)
    ax.set_title(
        f"mAP full {report.map_full:.3f} | seen {report.map_seen:.3f} | unseen {report.map_unseen:.3f}",
        fontsize=9,
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_ablation(rows, path):
    """Grouped bars: one group per adapter variant, one bar per metric.

    ``rows`` are dicts with keys variant/unseen/seen/full.
    """
    variants = [row["variant"] for row in rows]
    metrics = ("unseen", "seen", "full")
    colors = ("#d62728", "#1f77b4", "#7f7f7f")
    x = np.arange(len(variants))
    width = 0.26
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for i, (metric, color) in enumerate(zip(metrics, colors)):
        ax.bar(
            x + (i - 1) * width,
            [row[metric] for row in rows],
            width,
            label=f"mAP {metric}",
            color=color,
        )
    ax.set_xticks(x)
    ax.set_xticklabels(variants)
    ax.set_ylabel("mAP")
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
