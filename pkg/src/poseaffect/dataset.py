"""Corpus formats, labels, augmentation, synthetic data, and fold splits.

Canonical corpus: UTF-8 JSON-lines, LF endings. Line 1 is a header
{format_version, kind, topology{names, parents, mirror_pairs},
sample_rate_hz, emotion_vocabulary}; every other line is one record
{id, emotion, intensity, source, frames} with angles in radians.

kind "euler_angles": frames are per-frame [[roll...], [pitch...], [yaw...]]
descriptor rows. kind "local_quaternions": frames are per-frame, per-joint
[w, x, y, z, tx, ty, tz] local transforms; convert_corpus turns these into
descriptors, optionally reducing a sensor skeleton to the canonical one.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import CORPUS_FORMAT_VERSION
from .descriptor import PoseSequence, extract_descriptor, mirror_swap, phase_subsample
from .errors import (
    ConfigError,
    CorpusFormatError,
    InvalidTopologyError,
    LabelError,
)
from .kinematics import RigidTransform, Rotation, SkeletonTopology
from .skeletons import CANONICAL, SensorProfile


@dataclass(frozen=True, eq=False)
class EmotionContext:
    """Which emotion's intensity is being estimated: a one-hot over an
    ordered vocabulary."""

    vocabulary: tuple[str, ...]
    vector: np.ndarray

    def __post_init__(self):
        vocab = tuple(str(n) for n in self.vocabulary)
        if len(vocab) < 1:
            raise LabelError("emotion vocabulary must not be empty")
        if len(set(vocab)) != len(vocab):
            raise LabelError("emotion vocabulary has duplicate names")
        v = np.asarray(self.vector, dtype=float)
        if v.shape != (len(vocab),) or not (
            np.count_nonzero(v == 1.0) == 1 and np.count_nonzero(v) == 1
        ):
            raise LabelError("emotion vector must be one-hot over the vocabulary")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vocabulary", vocab)
        object.__setattr__(self, "vector", v)

    @classmethod
    def from_name(cls, vocabulary, name: str) -> "EmotionContext":
        vocab = tuple(vocabulary)
        if name not in vocab:
            raise LabelError(f"unknown emotion {name!r} (vocabulary: {', '.join(vocab)})")
        v = np.zeros(len(vocab))
        v[vocab.index(name)] = 1.0
        return cls(vocab, v)

    @property
    def index(self) -> int:
        return int(np.argmax(self.vector))

    @property
    def name(self) -> str:
        return self.vocabulary[self.index]

    def __eq__(self, other):
        return (
            isinstance(other, EmotionContext)
            and self.vocabulary == other.vocabulary
            and self.index == other.index
        )

    def __hash__(self):
        return hash((self.vocabulary, self.index))


@dataclass(frozen=True)
class IntensityLabel:
    """Ground-truth emotional intensity in [0, 1]."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 <= v <= 1.0) or not math.isfinite(v):
            raise LabelError(f"intensity must lie in [0, 1], got {self.value}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True, eq=False)
class LabeledSequence:
    sequence: PoseSequence
    emotion: EmotionContext
    intensity: IntensityLabel
    id: str


def group_key(sequence_id: str) -> str:
    """Source id shared by all augmented variants ("abc#m1p2" -> "abc")."""
    return sequence_id.split("#", 1)[0]


def derive_intensity(intended: str, perceived) -> IntensityLabel:
    """Fraction of annotator votes that match the intended emotion."""
    votes = list(perceived)
    if not votes:
        raise LabelError("perceived emotion set is empty")
    return IntensityLabel(sum(1 for v in votes if v == intended) / len(votes))


# ------------------------------------------------------------------ corpus io


def _topology_to_json(t: SkeletonTopology) -> dict:
    return {
        "names": list(t.names),
        "parents": list(t.parents),
        "mirror_pairs": [list(p) for p in t.mirror_pairs],
    }


def _topology_from_json(obj) -> SkeletonTopology:
    try:
        return SkeletonTopology(
            names=tuple(obj["names"]),
            parents=tuple(obj["parents"]),
            mirror_pairs=tuple((int(l), int(r)) for l, r in obj.get("mirror_pairs", [])),
        )
    except (KeyError, TypeError) as e:
        raise CorpusFormatError(f"malformed topology in header: {e}") from None


def _dump_line(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def save_corpus(
    corpus,
    path,
    topology: SkeletonTopology | None = None,
    sample_rate: float | None = None,
    vocabulary=None,
) -> None:
    """Write a corpus in the euler_angles format. Header fields come from the
    records; pass them explicitly to write an empty corpus."""
    corpus = list(corpus)
    if corpus:
        topology = corpus[0].sequence.topology
        sample_rate = corpus[0].sequence.sample_rate
        vocabulary = corpus[0].emotion.vocabulary
        for item in corpus:
            if item.sequence.topology != topology:
                raise ConfigError(f"record {item.id!r} has a different topology")
            if item.sequence.sample_rate != sample_rate:
                raise ConfigError(f"record {item.id!r} has a different sample rate")
            if item.emotion.vocabulary != vocabulary:
                raise ConfigError(f"record {item.id!r} has a different emotion vocabulary")
    elif topology is None or sample_rate is None or vocabulary is None:
        raise ConfigError("empty corpus needs explicit topology, sample_rate and vocabulary")

    header = {
        "format_version": CORPUS_FORMAT_VERSION,
        "kind": "euler_angles",
        "topology": _topology_to_json(topology),
        "sample_rate_hz": float(sample_rate),
        "emotion_vocabulary": list(vocabulary),
    }
    lines = [_dump_line(header)]
    for item in corpus:
        lines.append(
            _dump_line(
                {
                    "id": item.id,
                    "emotion": item.emotion.name,
                    "intensity": item.intensity.value,
                    "source": item.sequence.source,
                    "frames": item.sequence.frames.tolist(),
                }
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def save_quaternion_corpus(records, topology, sample_rate, vocabulary, path) -> None:
    """Write a local_quaternions corpus. records: iterable of
    (id, emotion, intensity, source, frames) with frames shaped
    (frame_count, joint_count, 7) as [w, x, y, z, tx, ty, tz]."""
    header = {
        "format_version": CORPUS_FORMAT_VERSION,
        "kind": "local_quaternions",
        "topology": _topology_to_json(topology),
        "sample_rate_hz": float(sample_rate),
        "emotion_vocabulary": list(vocabulary),
    }
    lines = [_dump_line(header)]
    for rid, emotion, intensity, source, frames in records:
        frames = np.asarray(frames, dtype=float)
        if frames.ndim != 3 or frames.shape[1:] != (topology.joint_count, 7):
            raise ConfigError(
                f"record {rid!r}: frames must be (n, {topology.joint_count}, 7), "
                f"got {frames.shape}"
            )
        lines.append(
            _dump_line(
                {
                    "id": rid,
                    "emotion": emotion,
                    "intensity": float(intensity),
                    "source": source,
                    "frames": frames.tolist(),
                }
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _read_header(path, expect_kind: str):
    if not os.path.exists(path):
        raise CorpusFormatError(f"no such corpus file: {path}")
    f = open(path, "r", encoding="utf-8")
    line = f.readline()
    if not line.strip():
        f.close()
        raise CorpusFormatError("line 1: missing corpus header")
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        f.close()
        raise CorpusFormatError(f"line 1: invalid JSON in header: {e}") from None
    version = header.get("format_version")
    if version != CORPUS_FORMAT_VERSION:
        f.close()
        raise CorpusFormatError(
            f"line 1: unsupported corpus format_version {version!r} "
            f"(expected {CORPUS_FORMAT_VERSION})"
        )
    kind = header.get("kind")
    if kind != expect_kind:
        f.close()
        raise CorpusFormatError(f"line 1: corpus kind {kind!r}, expected {expect_kind!r}")
    try:
        topology = _topology_from_json(header["topology"])
        rate = float(header["sample_rate_hz"])
        vocabulary = tuple(str(n) for n in header["emotion_vocabulary"])
    except KeyError as e:
        f.close()
        raise CorpusFormatError(f"line 1: header missing field {e}") from None
    except InvalidTopologyError as e:
        f.close()
        raise CorpusFormatError(f"line 1: {e}") from None
    if rate <= 0:
        f.close()
        raise CorpusFormatError(f"line 1: sample_rate_hz must be positive, got {rate}")
    if not vocabulary:
        f.close()
        raise CorpusFormatError("line 1: emotion_vocabulary must not be empty")
    return f, topology, rate, vocabulary


def _iter_records(f):
    with f:
        for lineno, line in enumerate(f, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"line {lineno}: invalid JSON: {e}") from None
            yield lineno, rec


def _record_fields(lineno, rec, vocabulary):
    for key in ("id", "emotion", "intensity", "frames"):
        if key not in rec:
            raise CorpusFormatError(f"line {lineno}: record missing field {key!r}")
    rid = str(rec["id"])
    if not rid:
        raise CorpusFormatError(f"line {lineno}: record id is empty")
    try:
        emotion = EmotionContext.from_name(vocabulary, rec["emotion"])
        intensity = IntensityLabel(rec["intensity"])
    except LabelError as e:
        raise CorpusFormatError(f"line {lineno}: record {rid!r}: {e}") from None
    return rid, emotion, intensity, str(rec.get("source", ""))


def load_corpus(path) -> list[LabeledSequence]:
    """Read an euler_angles corpus, validating every record."""
    f, topology, rate, vocabulary = _read_header(path, "euler_angles")
    out = []
    for lineno, rec in _iter_records(f):
        rid, emotion, intensity, source = _record_fields(lineno, rec, vocabulary)
        frames = rec["frames"]
        if not isinstance(frames, list) or not frames:
            raise CorpusFormatError(f"line {lineno}: record {rid!r}: empty frame list")
        try:
            arr = np.asarray(frames, dtype=float)
        except ValueError:
            raise CorpusFormatError(
                f"line {lineno}: record {rid!r}: ragged or non-numeric frames"
            ) from None
        try:
            seq = PoseSequence(arr, rate, topology, source)
        except Exception as e:
            raise CorpusFormatError(f"line {lineno}: record {rid!r}: {e}") from None
        out.append(LabeledSequence(seq, emotion, intensity, rid))
    return out


def convert_corpus(path, profile: SensorProfile | None = None) -> list[LabeledSequence]:
    """Read a local_quaternions corpus and extract descriptors.

    With a sensor profile, each frame's source skeleton is reduced to the
    canonical one first; the header topology must match the profile's.
    Sensor quaternions are accepted up to 1e-3 off unit norm and
    renormalized.
    """
    from .skeletons import reduce_to_canonical

    f, topology, rate, vocabulary = _read_header(path, "local_quaternions")
    if profile is not None and (
        topology.names != profile.topology.names or topology.parents != profile.topology.parents
    ):
        f.close()
        raise InvalidTopologyError(
            f"corpus topology does not match sensor profile {profile.name!r}"
        )
    out_topology = CANONICAL if profile is not None else topology

    out = []
    for lineno, rec in _iter_records(f):
        rid, emotion, intensity, source = _record_fields(lineno, rec, vocabulary)
        frames = np.asarray(rec["frames"], dtype=float)
        if frames.ndim != 3 or frames.shape[1:] != (topology.joint_count, 7):
            raise CorpusFormatError(
                f"line {lineno}: record {rid!r}: frames must be "
                f"(n, {topology.joint_count}, 7), got {frames.shape}"
            )
        try:
            locals_frames = []
            for t in range(frames.shape[0]):
                locals_frames.append(
                    [
                        RigidTransform(
                            Rotation.from_quaternion(frames[t, j, :4], atol=1e-3),
                            frames[t, j, 4:],
                        )
                        for j in range(topology.joint_count)
                    ]
                )
            if profile is not None:
                locals_frames = [reduce_to_canonical(profile, fr) for fr in locals_frames]
            seq = extract_descriptor(locals_frames, out_topology, rate, source)
        except Exception as e:
            raise CorpusFormatError(f"line {lineno}: record {rid!r}: {e}") from None
        out.append(LabeledSequence(seq, emotion, intensity, rid))
    return out


# --------------------------------------------------------------- augmentation


def augment(corpus, target_rate: float = 30.0) -> list[LabeledSequence]:
    """Mirror swap then phase subsampling: every input yields
    2 x (rate / target_rate) outputs with labels copied unchanged.

    Variant ids are "{source_id}#m{mirrored}p{phase}" so grouped splits can
    keep a source's variants together.
    """
    corpus = list(corpus)
    if not corpus:
        raise ConfigError("cannot augment an empty corpus")
    out = []
    for item in corpus:
        for m, seq in enumerate((item.sequence, mirror_swap(item.sequence))):
            for p, sub in enumerate(phase_subsample(seq, target_rate)):
                out.append(
                    LabeledSequence(sub, item.emotion, item.intensity, f"{item.id}#m{m}p{p}")
                )
    return out


# --------------------------------------------------------------- synthetic data

DEFAULT_INTENSITY_MAPS = {
    # intensity = slope * amplitude + offset; per-emotion maps are chosen so
    # amplitude alone cannot explain intensity across emotions
    "joy": (0.9, 0.05),
    "surprise": (0.45, 0.30),
    "sadness": (0.25, 0.65),
}

DEFAULT_MOVING_JOINTS = (
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
)


@dataclass(frozen=True)
class SynthConfig:
    count: int = 2500
    emotions: tuple[str, ...] = ("joy", "surprise", "sadness")
    intensity_maps: dict = field(default_factory=dict)  # name -> (slope, offset)
    min_length: int = 24
    max_length: int = 48
    sample_rate: float = 30.0
    noise_sigma: float = 0.0
    amplitude_max: float = 1.0
    moving_joints: tuple[str, ...] = DEFAULT_MOVING_JOINTS
    topology: SkeletonTopology = CANONICAL

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError(f"count must be >= 1, got {self.count}")
        if not self.emotions:
            raise ConfigError("at least one emotion is required")
        if not (1 <= self.min_length <= self.max_length):
            raise ConfigError(
                f"bad length range [{self.min_length}, {self.max_length}]"
            )
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if self.amplitude_max < 0:
            raise ConfigError("amplitude_max must be >= 0")
        maps = dict(self.intensity_maps)
        for name in self.emotions:
            if name not in maps:
                if name not in DEFAULT_INTENSITY_MAPS:
                    raise ConfigError(f"no intensity map for emotion {name!r}")
                maps[name] = DEFAULT_INTENSITY_MAPS[name]
            slope, offset = maps[name]
            if slope < 0 or offset < 0 or slope * self.amplitude_max + offset > 1.0:
                raise ConfigError(
                    f"intensity map for {name!r} leaves [0, 1]: "
                    f"slope {slope}, offset {offset}"
                )
        object.__setattr__(self, "intensity_maps", maps)
        for name in self.moving_joints:
            self.topology.index_of(name)


def generate_synthetic(config: SynthConfig, seed: int) -> list[LabeledSequence]:
    """Deterministic synthetic corpus: each sequence oscillates the pitch
    channel of a joint subset with amplitude a ~ U[0, a_max]; ground-truth
    intensity is the emotion's affine map of a, so estimating it correctly
    requires the emotion context. Pitch (not roll) so the oscillation swings
    limbs through space rather than twisting them about their own bone axis,
    keeping the motion visible to position-based features too."""
    rng = np.random.default_rng(seed)
    topo = config.topology
    m = topo.joint_count - 1
    col_of = {j: c for c, j in enumerate(topo.descriptor_order)}
    moving_cols = [col_of[topo.index_of(n)] for n in config.moving_joints]

    out = []
    for i in range(config.count):
        name = config.emotions[i % len(config.emotions)]
        slope, offset = config.intensity_maps[name]
        a = rng.uniform(0.0, config.amplitude_max) if config.amplitude_max > 0 else 0.0
        n = int(rng.integers(config.min_length, config.max_length + 1))
        freq = rng.uniform(1.0, 2.5)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=len(moving_cols))

        frames = np.zeros((n, 3, m))
        t = np.arange(n) / config.sample_rate
        for c, phi in zip(moving_cols, phases):
            frames[:, 1, c] = a * np.sin(2.0 * np.pi * freq * t + phi)
        if config.noise_sigma > 0:
            frames += rng.normal(0.0, config.noise_sigma, size=frames.shape)
        frames = np.clip(frames, -np.pi, np.pi)

        seq = PoseSequence(
            frames,
            config.sample_rate,
            topo,
            source=f"synthetic a={a:.6f} f={freq:.3f}",
        )
        out.append(
            LabeledSequence(
                seq,
                EmotionContext.from_name(config.emotions, name),
                IntensityLabel(slope * a + offset),
                f"syn{i:05d}",
            )
        )
    return out


# ------------------------------------------------------------------- k-fold


def kfold_split(corpus, k: int, seed: int) -> list[tuple[list[int], list[int]]]:
    """Grouped k-fold: all items sharing a source id (augmented variants)
    land in the same fold. Returns (train_indices, test_indices) per fold."""
    corpus = list(corpus)
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if len(corpus) < k:
        raise ConfigError(f"corpus of {len(corpus)} items cannot split into {k} folds")

    groups: dict[str, list[int]] = {}
    for idx, item in enumerate(corpus):
        groups.setdefault(group_key(item.id), []).append(idx)
    keys = list(groups)
    if len(keys) < k:
        raise ConfigError(f"only {len(keys)} source groups, cannot split into {k} folds")

    rng = np.random.default_rng(seed)
    order = [keys[i] for i in rng.permutation(len(keys))]

    # greedy balance: each group goes to the currently smallest fold
    fold_items: list[list[int]] = [[] for _ in range(k)]
    for key in order:
        smallest = min(range(k), key=lambda f: (len(fold_items[f]), f))
        fold_items[smallest].extend(groups[key])

    all_indices = set(range(len(corpus)))
    out = []
    for f in range(k):
        test = sorted(fold_items[f])
        train = sorted(all_indices - set(test))
        out.append((train, test))
    return out
