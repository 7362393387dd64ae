"""Command-line interface.

Subcommands cover the whole pipeline: synthesize or convert a corpus,
augment it, train the estimator, run the cross-validated comparison, score
a corpus against a saved checkpoint, and serve streaming inference. All
artifacts land under the --out directory with fixed names so reruns with
identical flags are byte-identical. Exit codes: 0 success, 2 usage error,
3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import (
    CHECKPOINT_FORMAT_VERSION,
    CORPUS_FORMAT_VERSION,
    STREAM_PROTOCOL_VERSION,
    __version__,
)
from . import baseline as bl
from . import model as mdl
from .dataset import (
    SynthConfig,
    _topology_from_json,
    augment,
    convert_corpus,
    generate_synthetic,
    load_corpus,
    save_corpus,
)
from .errors import ConfigError, LabelError, PoseAffectError
from .evaluation import LstmMethod, SvrMethod, cross_validate, write_report
from .figures import render_report_figures, render_training_figures
from .skeletons import CANONICAL, get_profile
from .streaming import StreamSession, serve_stdio, serve_tcp

_EXIT_CODES = {"usage": 2, "data": 3, "numeric": 4}

_VERSION_TEXT = (
    f"poseaffect {__version__} "
    f"(corpus format {CORPUS_FORMAT_VERSION}, "
    f"checkpoint format {CHECKPOINT_FORMAT_VERSION}, "
    f"stream protocol {STREAM_PROTOCOL_VERSION})"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: usage: {message}\n")


def _load_topology(path):
    if path is None:
        return CANONICAL
    with open(path, encoding="utf-8") as f:
        return _topology_from_json(json.load(f))


def _train_config(args) -> mdl.TrainConfig:
    return mdl.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        hidden1=args.hidden1,
        hidden2=args.hidden2,
    )


def _write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_predictions_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "emotion", "label", "prediction"])
        for rid, emotion, label, pred in rows:
            writer.writerow([rid, emotion, repr(float(label)), repr(float(pred))])


# ------------------------------------------------------------------ commands


def cmd_synth(args) -> int:
    config = SynthConfig(
        count=args.count,
        emotions=tuple(args.emotions.split(",")),
        noise_sigma=args.noise,
    )
    corpus = generate_synthetic(config, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "synthetic.jsonl")
    save_corpus(corpus, out_path)
    print(f"wrote {len(corpus)} sequences to {out_path}")
    return 0


def cmd_convert(args) -> int:
    profile = get_profile(args.profile) if args.profile else None
    corpus = convert_corpus(args.in_path, profile=profile)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "converted.jsonl")
    save_corpus(corpus, out_path)
    print(f"wrote {len(corpus)} sequences to {out_path}")
    return 0


def cmd_augment(args) -> int:
    corpus = load_corpus(args.in_path)
    augmented = augment(corpus, target_rate=args.rate)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "augmented.jsonl")
    save_corpus(augmented, out_path)
    print(f"wrote {len(augmented)} sequences ({len(corpus)} before augmentation) to {out_path}")
    return 0


def _load_nonempty(path):
    corpus = load_corpus(path)
    if not corpus:
        raise ConfigError(f"corpus {path} has no records")
    return corpus


def cmd_train(args) -> int:
    corpus = _load_nonempty(args.in_path)
    params, log = mdl.train(corpus, _train_config(args))
    os.makedirs(args.out, exist_ok=True)

    ckpt_path = os.path.join(args.out, "model.ckpt")
    mdl.save_checkpoint(
        params, ckpt_path, corpus[0].emotion.vocabulary, corpus[0].sequence.topology
    )
    log_path = os.path.join(args.out, "training_log.json")
    _write_json(log, log_path)
    written = [ckpt_path, log_path]
    if not args.no_figures:
        written += render_training_figures(log, os.path.join(args.out, "figures"))
    print(f"final epoch loss {log['epoch_mean_loss'][-1]:.6f}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _build_methods(tokens, train_config):
    methods = []
    for token in tokens:
        if token == "lstm":
            methods.append(LstmMethod(train_config))
        elif token == "lstm_blind":
            method = LstmMethod(train_config, zero_emotion=True)
            method.name = "lstm_blind"
            methods.append(method)
        elif token == "svr":
            methods.append(SvrMethod(bl.SvrConfig()))
        else:
            raise ConfigError(
                f"unknown method {token!r} (known: lstm, lstm_blind, svr)"
            )
    return methods


def cmd_eval(args) -> int:
    corpus = _load_nonempty(args.in_path)
    methods = _build_methods(args.methods.split(","), _train_config(args))
    report = cross_validate(corpus, k=args.k, methods=methods, seed=args.seed)
    written = write_report(report, args.out)
    if not args.no_figures:
        written += render_report_figures(report, os.path.join(args.out, "figures"))
    for name in report.method_names:
        print(f"{name}: mean r = {report.mean_scores[name]:.4f} over {report.k} folds")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_infer(args) -> int:
    corpus = _load_nonempty(args.in_path)
    params, header = mdl.load_checkpoint(args.checkpoint)
    mdl.check_topology_compatible(header, corpus[0].sequence.topology)
    vocabulary = tuple(header["emotion_vocabulary"])
    if corpus[0].emotion.vocabulary != vocabulary:
        raise LabelError(
            f"corpus emotion vocabulary {corpus[0].emotion.vocabulary} does not "
            f"match the checkpoint's {vocabulary}"
        )
    preds = mdl.predict_many(params, corpus)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "predictions.csv")
    _write_predictions_csv(
        [
            (it.id, it.emotion.name, it.intensity.value, p)
            for it, p in zip(corpus, preds)
        ],
        out_path,
    )
    print(f"wrote {out_path}")
    return 0


def cmd_stream(args) -> int:
    params, header = mdl.load_checkpoint(args.checkpoint)
    topology = _load_topology(args.topology)
    mdl.check_topology_compatible(header, topology)
    profile = get_profile(args.profile) if args.profile else None

    def session_factory():
        return StreamSession(
            params,
            tuple(header["emotion_vocabulary"]),
            topology,
            profile=profile,
            window=args.window,
            hop=args.hop,
            threshold=args.threshold,
        )

    if args.tcp_port is not None:
        server = serve_tcp(session_factory, args.host, args.tcp_port)
        print(f"listening on {server.server_address[0]}:{server.server_address[1]}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
        return 0

    serve_stdio(session_factory(), sys.stdin, sys.stdout)
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="poseaffect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_VERSION_TEXT)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=500, help="number of sequences")
    p.add_argument("--noise", type=float, default=0.0, help="angle noise sigma (rad)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--emotions",
        default="joy,surprise,sadness",
        help="comma-separated emotion vocabulary",
    )
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="convert a quaternion corpus to descriptors")
    p.add_argument("--in", dest="in_path", required=True, help="local_quaternions corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--profile", default=None, help="sensor profile (e.g. kinect25, mpi23)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("augment", help="mirror and phase-subsample a corpus")
    p.add_argument("--in", dest="in_path", required=True, help="euler_angles corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rate", type=float, default=30.0, help="target sample rate (Hz)")
    p.set_defaults(func=cmd_augment)

    def add_train_flags(p):
        p.add_argument("--epochs", type=int, default=100)
        p.add_argument("--batch-size", type=int, default=256)
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--hidden1", type=int, default=64)
        p.add_argument("--hidden2", type=int, default=128)
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("train", help="train the intensity estimator")
    p.add_argument("--in", dest="in_path", required=True, help="euler_angles corpus")
    p.add_argument("--out", required=True, help="output directory")
    add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validated model vs baseline comparison")
    p.add_argument("--in", dest="in_path", required=True, help="euler_angles corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k", type=int, default=5, help="number of folds")
    p.add_argument(
        "--methods",
        default="lstm,svr",
        help="comma-separated methods: lstm, lstm_blind, svr",
    )
    add_train_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="score a corpus with a saved checkpoint")
    p.add_argument("--in", dest="in_path", required=True, help="euler_angles corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("stream", help="line-protocol streaming inference")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--topology", default=None, help="topology JSON (default: canonical)")
    p.add_argument("--profile", default=None, help="sensor profile for incoming frames")
    p.add_argument("--window", type=int, default=90, help="frames per estimate")
    p.add_argument("--hop", type=int, default=15, help="frames between estimates")
    p.add_argument("--threshold", type=float, default=0.5, help="weak/strong boundary")
    p.add_argument("--tcp-port", type=int, default=None, help="serve TCP instead of stdio")
    p.add_argument("--host", default="127.0.0.1", help="bind address for --tcp-port")
    p.set_defaults(func=cmd_stream)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except PoseAffectError as e:
        print(f"error: {e.category}: {e}", file=sys.stderr)
        return _EXIT_CODES[e.category]
    except OSError as e:
        print(f"error: data: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
