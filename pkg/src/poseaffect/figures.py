"""Figure rendering for training logs and evaluation reports.

Plots are written as PNG files next to the delimited outputs; callers can
turn them off entirely, and nothing here is needed for the numeric results.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_training_loss(log: dict, path) -> str:
    losses = log["epoch_mean_loss"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(range(1, len(losses) + 1), losses, marker="o", markersize=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean absolute error")
    ax.set_title("training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)


def save_fold_scores(report, path) -> str:
    names = list(report.method_names)
    k = report.k
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / max(len(names), 1)
    for i, name in enumerate(names):
        xs = [f + i * width for f in range(k)]
        ax.bar(xs, report.fold_scores[name], width=width, label=name)
    ax.set_xticks([f + width * (len(names) - 1) / 2 for f in range(k)])
    ax.set_xticklabels([f"fold {f}" for f in range(k)])
    ax.set_ylabel("Pearson r")
    ax.set_ylim(-1.0, 1.0)
    ax.set_title("cross-validation scores")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)


def save_predictions_scatter(method_name: str, rows, r: float, path) -> str:
    labels = [row["label"] for row in rows]
    preds = [row["prediction"] for row in rows]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(labels, preds, s=8, alpha=0.5)
    ax.plot([0, 1], [0, 1], color="gray", linewidth=1, linestyle="--")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("label")
    ax.set_ylabel("prediction")
    ax.set_title(f"{method_name} (r = {r:.3f})")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return str(path)


def render_report_figures(report, fig_dir) -> list[str]:
    os.makedirs(fig_dir, exist_ok=True)
    paths = [save_fold_scores(report, os.path.join(fig_dir, "fold_scores.png"))]
    for name in report.method_names:
        paths.append(
            save_predictions_scatter(
                name,
                report.predictions[name],
                report.mean_scores[name],
                os.path.join(fig_dir, f"predictions_{name}.png"),
            )
        )
    return paths


def render_training_figures(log: dict, fig_dir) -> list[str]:
    os.makedirs(fig_dir, exist_ok=True)
    return [save_training_loss(log, os.path.join(fig_dir, "training_loss.png"))]
