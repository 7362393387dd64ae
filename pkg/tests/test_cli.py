"""End-to-end CLI tests: artifacts, determinism, and exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from poseaffect.cli import main
from poseaffect.dataset import load_corpus, save_quaternion_corpus
from poseaffect.model import init_params, save_checkpoint
from poseaffect.skeletons import CANONICAL, KINECT25

VOCAB = ("joy", "surprise", "sadness")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def make_synth(capsys, tmp_path, name="data", count=16, seed=1):
    out = tmp_path / name
    code, _, _ = run(capsys, "synth", "--out", str(out), "--count", str(count), "--seed", str(seed))
    assert code == 0
    return out / "synthetic.jsonl"


TRAIN_FLAGS = ["--epochs", "2", "--batch-size", "8", "--hidden1", "6", "--hidden2", "8"]


# ------------------------------------------------------------- basic wiring


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0
    assert out.startswith("poseaffect 0.1.0")
    assert "corpus format 1" in out


def test_no_command_is_usage_error(capsys):
    code, _, err = run(capsys)
    assert code == 2
    assert err.startswith("error: usage:")


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "synth", "--out", "x", "--frobnicate")
    assert code == 2
    assert err.startswith("error: usage:")


def test_bad_flag_value_is_usage_error(capsys):
    code, _, err = run(capsys, "synth", "--out", "x", "--count", "many")
    assert code == 2
    assert err.startswith("error: usage:")


def test_missing_input_is_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--in", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path))
    assert code == 3
    assert err.startswith("error: data:")


# -------------------------------------------------------------------- synth


def test_synth_writes_deterministic_corpus(capsys, tmp_path):
    path_a = make_synth(capsys, tmp_path, "a", count=12, seed=7)
    path_b = make_synth(capsys, tmp_path, "b", count=12, seed=7)
    assert read_bytes(path_a) == read_bytes(path_b)
    corpus = load_corpus(path_a)
    assert len(corpus) == 12
    assert corpus[0].emotion.vocabulary == VOCAB


def test_synth_different_seed_differs(capsys, tmp_path):
    path_a = make_synth(capsys, tmp_path, "a", seed=1)
    path_b = make_synth(capsys, tmp_path, "b", seed=2)
    assert read_bytes(path_a) != read_bytes(path_b)


def test_synth_bad_emotion_is_data_error(capsys, tmp_path):
    code, _, err = run(capsys, "synth", "--out", str(tmp_path), "--emotions", "bliss")
    assert code == 3
    assert "intensity map" in err


# ------------------------------------------------------------------ augment


def test_augment_doubles_with_unit_stride(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path, count=5)
    code, out, _ = run(
        capsys, "augment", "--in", str(corpus_path), "--out", str(tmp_path / "aug")
    )
    assert code == 0
    augmented = load_corpus(tmp_path / "aug" / "augmented.jsonl")
    assert len(augmented) == 10
    assert "10 sequences (5 before augmentation)" in out
    assert {it.id.split("#")[1] for it in augmented} == {"m0p0", "m1p0"}


def test_augment_non_integer_stride_is_data_error(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path, count=3)
    code, _, err = run(
        capsys, "augment", "--in", str(corpus_path), "--out", str(tmp_path / "aug"),
        "--rate", "20",
    )
    assert code == 3
    assert err.startswith("error: data:")


# ------------------------------------------------------------------ convert


def quaternion_corpus(path, topology, n_frames=4, n_records=3):
    rng = np.random.default_rng(0)
    records = []
    for i in range(n_records):
        frames = np.zeros((n_frames, topology.joint_count, 7))
        frames[:, :, 0] = 1.0  # identity rotations
        frames[:, :, 4:] = rng.normal(size=(n_frames, topology.joint_count, 3))
        records.append((f"rec{i}", "joy", 0.5, "capture", frames))
    save_quaternion_corpus(records, topology, 30.0, VOCAB, path)


def test_convert_canonical(capsys, tmp_path):
    src = tmp_path / "quat.jsonl"
    quaternion_corpus(src, CANONICAL)
    code, _, _ = run(capsys, "convert", "--in", str(src), "--out", str(tmp_path / "conv"))
    assert code == 0
    corpus = load_corpus(tmp_path / "conv" / "converted.jsonl")
    assert [it.id for it in corpus] == ["rec0", "rec1", "rec2"]
    assert np.all(corpus[0].sequence.frames == 0.0)  # identity rotations


def test_convert_with_profile(capsys, tmp_path):
    src = tmp_path / "kinect.jsonl"
    quaternion_corpus(src, KINECT25)
    code, _, _ = run(
        capsys, "convert", "--in", str(src), "--out", str(tmp_path / "conv"),
        "--profile", "kinect25",
    )
    assert code == 0
    corpus = load_corpus(tmp_path / "conv" / "converted.jsonl")
    assert corpus[0].sequence.topology == CANONICAL


def test_convert_unknown_profile_is_data_error(capsys, tmp_path):
    src = tmp_path / "quat.jsonl"
    quaternion_corpus(src, CANONICAL)
    code, _, err = run(
        capsys, "convert", "--in", str(src), "--out", str(tmp_path / "conv"),
        "--profile", "vicon",
    )
    assert code == 3
    assert "unknown sensor profile" in err


# ------------------------------------------------------------- train, infer


def test_train_artifacts_and_determinism(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path)
    for name in ("run1", "run2"):
        code, out, _ = run(
            capsys, "train", "--in", str(corpus_path), "--out", str(tmp_path / name),
            *TRAIN_FLAGS,
        )
        assert code == 0
        assert "final epoch loss" in out
    for fname in ("model.ckpt", "training_log.json"):
        assert read_bytes(tmp_path / "run1" / fname) == read_bytes(tmp_path / "run2" / fname)
    log = json.loads((tmp_path / "run1" / "training_log.json").read_text())
    assert len(log["epoch_mean_loss"]) == 2
    assert (tmp_path / "run1" / "figures" / "training_loss.png").exists()


def test_train_no_figures(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path)
    code, _, _ = run(
        capsys, "train", "--in", str(corpus_path), "--out", str(tmp_path / "run"),
        "--no-figures", *TRAIN_FLAGS,
    )
    assert code == 0
    assert not (tmp_path / "run" / "figures").exists()


def test_infer_predictions(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path)
    run(capsys, "train", "--in", str(corpus_path), "--out", str(tmp_path / "run"),
        "--no-figures", *TRAIN_FLAGS)
    code, _, _ = run(
        capsys, "infer", "--in", str(corpus_path),
        "--checkpoint", str(tmp_path / "run" / "model.ckpt"),
        "--out", str(tmp_path / "scores"),
    )
    assert code == 0
    lines = (tmp_path / "scores" / "predictions.csv").read_text().splitlines()
    assert lines[0] == "id,emotion,label,prediction"
    assert len(lines) == 1 + 16
    for line in lines[1:]:
        pred = float(line.split(",")[3])
        assert 0.0 < pred < 1.0


def test_infer_vocabulary_mismatch_is_data_error(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path)
    ckpt = tmp_path / "other.ckpt"
    params = init_params(CANONICAL.joint_count, 2, hidden1=4, hidden2=5, rng=0)
    save_checkpoint(params, ckpt, ("anger", "fear"), CANONICAL)
    code, _, err = run(
        capsys, "infer", "--in", str(corpus_path), "--checkpoint", str(ckpt),
        "--out", str(tmp_path / "scores"),
    )
    assert code == 3
    assert "vocabulary" in err


def test_infer_corrupt_checkpoint_is_data_error(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path)
    ckpt = tmp_path / "bad.ckpt"
    ckpt.write_bytes(b'{"format_version": 1}\n\x00\x01')
    code, _, err = run(
        capsys, "infer", "--in", str(corpus_path), "--checkpoint", str(ckpt),
        "--out", str(tmp_path / "scores"),
    )
    assert code == 3
    assert err.startswith("error: data:")


# --------------------------------------------------------------------- eval


def test_eval_report_and_determinism(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path, count=12)
    argv = ["eval", "--in", str(corpus_path), "--k", "3", "--methods", "lstm,svr",
            *TRAIN_FLAGS]
    for name in ("e1", "e2"):
        code, out, _ = run(capsys, *argv, "--out", str(tmp_path / name))
        assert code == 0
        assert "lstm: mean r" in out and "svr: mean r" in out
    for fname in ("report.json", "predictions_lstm.csv", "predictions_svr.csv"):
        assert read_bytes(tmp_path / "e1" / fname) == read_bytes(tmp_path / "e2" / fname)
    report = json.loads((tmp_path / "e1" / "report.json").read_text())
    assert report["k"] == 3
    assert len(report["fold_scores"]["lstm"]) == 3
    assert (tmp_path / "e1" / "figures" / "fold_scores.png").exists()
    assert (tmp_path / "e1" / "figures" / "predictions_svr.png").exists()


def test_eval_blind_method(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path, count=8)
    code, out, _ = run(
        capsys, "eval", "--in", str(corpus_path), "--out", str(tmp_path / "e"),
        "--k", "2", "--methods", "lstm_blind", "--no-figures", *TRAIN_FLAGS,
    )
    assert code == 0
    assert "lstm_blind: mean r" in out
    report = json.loads((tmp_path / "e" / "report.json").read_text())
    assert report["methods"] == ["lstm_blind"]
    assert report["metadata"]["lstm_blind"]["zero_emotion"] is True


def test_eval_unknown_method_is_data_error(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path, count=6)
    code, _, err = run(
        capsys, "eval", "--in", str(corpus_path), "--out", str(tmp_path / "e"),
        "--methods", "forest",
    )
    assert code == 3
    assert "unknown method" in err


def test_eval_k_too_large_is_data_error(capsys, tmp_path):
    corpus_path = make_synth(capsys, tmp_path, count=4)
    code, _, err = run(
        capsys, "eval", "--in", str(corpus_path), "--out", str(tmp_path / "e"),
        "--k", "9", *TRAIN_FLAGS,
    )
    assert code == 3
    assert err.startswith("error: data:")


# ------------------------------------------------------------------- stream


def identity_frame_line(t_ms):
    joints = [[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]] * CANONICAL.joint_count
    return json.dumps({"v": 1, "type": "frame", "t_ms": t_ms, "joints": joints})


def stream_checkpoint(tmp_path):
    ckpt = tmp_path / "stream.ckpt"
    params = init_params(CANONICAL.joint_count, len(VOCAB), hidden1=6, hidden2=8, rng=0)
    save_checkpoint(params, ckpt, VOCAB, CANONICAL)
    return ckpt


def stream_proc(tmp_path, stdin_text, *extra):
    return subprocess.run(
        [sys.executable, "-m", "poseaffect.cli", "stream",
         "--checkpoint", str(stream_checkpoint(tmp_path)),
         "--window", "2", "--hop", "1", *extra],
        input=stdin_text, capture_output=True, text=True, timeout=60,
    )


def test_stream_stdio(tmp_path):
    lines = "\n".join(identity_frame_line(i * 33.0) for i in range(3)) + "\n"
    proc = stream_proc(tmp_path, lines)
    assert proc.returncode == 0, proc.stderr
    out = [json.loads(line) for line in proc.stdout.splitlines()]
    # window 2, hop 1: estimates after frames 2 and 3, each estimate + tag
    assert [o["type"] for o in out] == ["estimate", "tag", "estimate", "tag"]
    assert out[0]["value"] == out[2]["value"]  # constant input
    assert out[1]["emotion"] == "joy"
    assert out[1]["level"] in ("weak", "strong")


def test_stream_bad_input_is_data_error(tmp_path):
    proc = stream_proc(tmp_path, '{"v":9,"type":"frame","t_ms":0,"joints":[]}\n')
    assert proc.returncode == 3
    assert proc.stderr.startswith("error: data:")


def test_stream_threshold_validation(tmp_path):
    proc = stream_proc(tmp_path, "", "--threshold", "2.0")
    assert proc.returncode == 3
    assert "threshold" in proc.stderr
