"""Pearson scoring, cross-validated model-vs-baseline comparison, and
report serialization (JSON summary plus per-method prediction CSVs)."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from . import baseline as bl
from . import model as mdl
from .dataset import group_key, kfold_split
from .errors import DimensionError, PoseAffectError, UndefinedCorrelationError


def pearson(x, y) -> float:
    """Sample Pearson correlation, clipped into [-1, 1]. Zero variance in
    either argument is an error, never a NaN."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionError(f"pearson needs equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise DimensionError(f"pearson needs at least 2 points, got {x.size}")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    dx = x - x.mean()
    dy = y - y.mean()
    r = float(np.dot(dx, dy) / np.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))
    return float(np.clip(r, -1.0, 1.0))


class LstmMethod:
    """Cross-validation adapter around the LSTM estimator."""

    name = "lstm"

    def __init__(self, config: mdl.TrainConfig, zero_emotion: bool = False):
        self.config = config
        self.zero_emotion = zero_emotion  # ablation: hide E at prediction time
        self.params = None
        self.log = None

    def fit(self, items, seed: int):
        self.params, self.log = mdl.train(items, replace(self.config, seed=seed))

    def predict_many(self, items) -> np.ndarray:
        x, mask, e, _ = mdl.pad_batch(items)
        if self.zero_emotion:
            e = np.zeros_like(e)
        return mdl.forward_batch(self.params, x, mask, e)

    def describe(self) -> dict:
        d = {
            "kind": "lstm_intensity",
            "epochs": self.config.epochs,
            "batch_size": self.config.batch_size,
            "learning_rate": self.config.learning_rate,
            "rms_decay": self.config.rms_decay,
            "rms_epsilon": self.config.rms_epsilon,
            "gradient_clip_norm": self.config.gradient_clip_norm,
            "hidden1": self.config.hidden1,
            "hidden2": self.config.hidden2,
        }
        if self.zero_emotion:
            d["zero_emotion"] = True
        return d


class SvrMethod:
    """Cross-validation adapter around the handcrafted-feature SVR."""

    name = "svr"

    def __init__(self, config: bl.SvrConfig):
        self.config = config
        self.regressor = None

    def fit(self, items, seed: int):
        feats = bl.features_for_items(items)
        labels = np.array([it.intensity.value for it in items])
        self.regressor = bl.svr_fit(feats, labels, replace(self.config, seed=seed))

    def predict_many(self, items) -> np.ndarray:
        return bl.svr_predict_many(self.regressor, bl.features_for_items(items))

    def describe(self) -> dict:
        return {
            "kind": "linear_svr",
            "epsilon": self.config.epsilon,
            "l2": self.config.l2,
            "epochs": self.config.epochs,
            "batch_size": self.config.batch_size,
            "learning_rate": self.config.learning_rate,
        }


@dataclass
class EvalReport:
    k: int
    seed: int
    method_names: tuple[str, ...]
    fold_scores: dict  # name -> [r per fold]
    mean_scores: dict  # name -> mean r
    predictions: dict  # name -> [{id, emotion, label, prediction, fold}]
    metadata: dict

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "methods": list(self.method_names),
            "fold_scores": self.fold_scores,
            "mean_scores": self.mean_scores,
            "metadata": self.metadata,
        }


def cross_validate(corpus, k: int, methods, seed: int) -> EvalReport:
    """Grouped k-fold comparison. Every method is retrained per fold with a
    fold-specific seed; scores are Pearson r on the raw estimates."""
    corpus = list(corpus)
    folds = kfold_split(corpus, k, seed)

    fold_scores = {m.name: [] for m in methods}
    predictions = {m.name: [] for m in methods}
    for fold_idx, (train_idx, test_idx) in enumerate(folds):
        train_items = [corpus[i] for i in train_idx]
        test_items = [corpus[i] for i in test_idx]
        train_groups = {group_key(it.id) for it in train_items}
        test_groups = {group_key(it.id) for it in test_items}
        assert not train_groups & test_groups, "augmentation leaked across the split"

        labels = np.array([it.intensity.value for it in test_items])
        for method in methods:
            try:
                method.fit(train_items, seed=seed + fold_idx)
                preds = np.asarray(method.predict_many(test_items), dtype=float)
                r = pearson(preds, labels)
            except PoseAffectError as e:
                raise type(e)(f"fold {fold_idx}, method {method.name}: {e}") from e
            fold_scores[method.name].append(r)
            predictions[method.name].extend(
                {
                    "id": it.id,
                    "emotion": it.emotion.name,
                    "label": it.intensity.value,
                    "prediction": float(p),
                    "fold": fold_idx,
                }
                for it, p in zip(test_items, preds)
            )

    mean_scores = {name: float(np.mean(rs)) for name, rs in fold_scores.items()}
    return EvalReport(
        k=k,
        seed=seed,
        method_names=tuple(m.name for m in methods),
        fold_scores=fold_scores,
        mean_scores=mean_scores,
        predictions=predictions,
        metadata={m.name: m.describe() for m in methods},
    )


def write_report(report: EvalReport, out_dir) -> list[str]:
    """Emit report.json plus one predictions_<method>.csv per method.
    Output is byte-stable for identical inputs."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
    paths.append(report_path)

    for name in report.method_names:
        csv_path = os.path.join(out_dir, f"predictions_{name}.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["id", "emotion", "label", "prediction"])
            for row in report.predictions[name]:
                writer.writerow(
                    [row["id"], row["emotion"], repr(row["label"]), repr(row["prediction"])]
                )
        paths.append(csv_path)
    return paths
