"""Pearson scoring, cross-validation harness, and report output tests."""

import json

import numpy as np
import pytest

from poseaffect.baseline import SvrConfig
from poseaffect.dataset import SynthConfig, augment, generate_synthetic, group_key
from poseaffect.errors import DimensionError, UndefinedCorrelationError
from poseaffect.evaluation import (
    EvalReport,
    LstmMethod,
    SvrMethod,
    cross_validate,
    pearson,
    write_report,
)
from poseaffect.model import TrainConfig


# --------------------------------------------------------------------- r


def test_pearson_perfect_positive():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)


def test_pearson_perfect_negative():
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_matches_numpy(rng):
    for _ in range(50):
        n = int(rng.integers(2, 40))
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-12)


def test_pearson_affine_invariance_and_symmetry(rng):
    x = rng.normal(size=20)
    y = rng.normal(size=20)
    r = pearson(x, y)
    assert pearson(3.0 * x + 7.0, y) == pytest.approx(r, abs=1e-12)
    assert pearson(-2.0 * x + 1.0, y) == pytest.approx(-r, abs=1e-12)
    assert pearson(y, x) == pytest.approx(r, abs=1e-12)
    assert -1.0 <= r <= 1.0


def test_pearson_rejects_constant_input():
    with pytest.raises(UndefinedCorrelationError):
        pearson([1.0, 1.0, 1.0], [1, 2, 3])
    with pytest.raises(UndefinedCorrelationError):
        pearson([1, 2, 3], [0.5, 0.5, 0.5])


def test_pearson_shape_checks():
    with pytest.raises(DimensionError):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(DimensionError):
        pearson([1.0], [2.0])
    with pytest.raises(DimensionError):
        pearson(np.zeros((2, 2)), np.zeros((2, 2)))


# ---------------------------------------------------------- cross-validation


class OracleMethod:
    """Returns the true label: every fold must score r = 1."""

    name = "oracle"

    def fit(self, items, seed):
        self.seeds = getattr(self, "seeds", []) + [seed]

    def predict_many(self, items):
        return np.array([it.intensity.value for it in items])

    def describe(self):
        return {"kind": "oracle"}


class ConstantMethod:
    name = "const"

    def fit(self, items, seed):
        pass

    def predict_many(self, items):
        return np.full(len(items), 0.5)

    def describe(self):
        return {"kind": "const"}


def small_corpus(count=12, seed=3):
    return generate_synthetic(SynthConfig(count=count), seed=seed)


def test_oracle_scores_one_every_fold():
    report = cross_validate(small_corpus(), k=3, methods=[OracleMethod()], seed=0)
    assert report.fold_scores["oracle"] == [pytest.approx(1.0, abs=1e-12)] * 3
    assert report.mean_scores["oracle"] == pytest.approx(1.0, abs=1e-12)
    assert report.k == 3 and report.method_names == ("oracle",)
    assert report.metadata["oracle"] == {"kind": "oracle"}


def test_each_item_predicted_exactly_once():
    corpus = small_corpus()
    report = cross_validate(corpus, k=3, methods=[OracleMethod()], seed=1)
    rows = report.predictions["oracle"]
    assert sorted(r["id"] for r in rows) == sorted(it.id for it in corpus)
    assert {r["fold"] for r in rows} == {0, 1, 2}
    by_id = {it.id: it for it in corpus}
    for r in rows:
        assert r["label"] == by_id[r["id"]].intensity.value
        assert r["emotion"] == by_id[r["id"]].emotion.name


def test_fold_seeds_are_distinct():
    method = OracleMethod()
    cross_validate(small_corpus(), k=3, methods=[method], seed=10)
    assert method.seeds == [10, 11, 12]


def test_constant_predictor_error_names_fold_and_method():
    with pytest.raises(UndefinedCorrelationError, match="fold 0, method const"):
        cross_validate(small_corpus(), k=3, methods=[ConstantMethod()], seed=0)


def test_augmented_groups_stay_clean():
    corpus = augment(small_corpus(count=9), target_rate=30.0)
    report = cross_validate(corpus, k=3, methods=[OracleMethod()], seed=2)
    fold_of = {}
    for row in report.predictions["oracle"]:
        key = group_key(row["id"])
        fold_of.setdefault(key, set()).add(row["fold"])
    assert all(len(folds) == 1 for folds in fold_of.values())


def test_cross_validation_deterministic():
    corpus = small_corpus(count=10, seed=6)
    cfg = SvrConfig(epochs=40)
    a = cross_validate(corpus, k=2, methods=[SvrMethod(cfg)], seed=4)
    b = cross_validate(corpus, k=2, methods=[SvrMethod(cfg)], seed=4)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)
    assert a.predictions == b.predictions


def test_lstm_method_integration():
    corpus = small_corpus(count=10, seed=8)
    cfg = TrainConfig(epochs=2, batch_size=4, hidden1=6, hidden2=8)
    report = cross_validate(corpus, k=2, methods=[LstmMethod(cfg)], seed=0)
    assert len(report.fold_scores["lstm"]) == 2
    assert all(-1.0 <= r <= 1.0 for r in report.fold_scores["lstm"])
    assert report.metadata["lstm"]["hidden2"] == 8


def test_lstm_ablation_flag_recorded():
    method = LstmMethod(TrainConfig(epochs=1, hidden1=4, hidden2=5), zero_emotion=True)
    assert method.describe()["zero_emotion"] is True


# --------------------------------------------------------------- report i/o


def test_write_report_outputs(tmp_path):
    report = cross_validate(small_corpus(), k=3, methods=[OracleMethod()], seed=0)
    paths = write_report(report, tmp_path)
    assert [p.split("/")[-1] for p in paths] == ["report.json", "predictions_oracle.csv"]

    with open(paths[0], encoding="utf-8") as f:
        obj = json.load(f)
    assert obj["k"] == 3
    assert obj["methods"] == ["oracle"]
    assert obj["mean_scores"]["oracle"] == pytest.approx(1.0)

    with open(paths[1], encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0] == "id,emotion,label,prediction"
    assert len(lines) == 1 + 12
    first = lines[1].split(",")
    assert float(first[2]) == float(first[3])  # oracle predicts the label


def test_write_report_byte_stable(tmp_path):
    report = cross_validate(small_corpus(), k=3, methods=[OracleMethod()], seed=0)
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    for path_a, path_b in zip(write_report(report, dir_a), write_report(report, dir_b)):
        assert open(path_a, "rb").read() == open(path_b, "rb").read()


def test_report_json_round_trips():
    report = EvalReport(
        k=2,
        seed=1,
        method_names=("m",),
        fold_scores={"m": [0.5, 0.75]},
        mean_scores={"m": 0.625},
        predictions={"m": []},
        metadata={"m": {"kind": "test"}},
    )
    encoded = json.loads(json.dumps(report.to_json()))
    assert encoded["fold_scores"]["m"] == [0.5, 0.75]
    assert encoded["seed"] == 1
