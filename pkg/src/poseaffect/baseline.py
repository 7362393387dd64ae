"""Handcrafted-feature baseline: motion statistics plus a linear
epsilon-insensitive support-vector regressor trained by seeded subgradient
descent.

Features per sequence: per-joint speed mean/max, per-joint acceleration
mean/max, hinge-joint angle mean/max, and bounding-box volume mean/max. All
are computed from joint positions reconstructed by forward kinematics from
the descriptor angles and the canonical rest offsets, so the baseline
consumes exactly the same corpora as the network.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .descriptor import PoseSequence
from .errors import ConfigError, FeatureError
from .kinematics import SkeletonTopology, euler_to_matrix, fk_positions
from .skeletons import CANONICAL, CANONICAL_REST_OFFSETS


def rest_offsets_for(topology: SkeletonTopology) -> np.ndarray:
    """Bone offsets used to reconstruct positions. Only the canonical
    skeleton has known offsets; other topologies must be converted first."""
    if topology.names == CANONICAL.names and topology.parents == CANONICAL.parents:
        return CANONICAL_REST_OFFSETS
    raise FeatureError(
        "no rest offsets known for this topology; reduce the corpus to the "
        "canonical skeleton first"
    )


def positions_from_sequence(seq: PoseSequence, offsets: np.ndarray | None = None) -> np.ndarray:
    """Descriptor angles -> joint positions (frame_count, J, 3). The root
    rotation is not part of the descriptor and is taken as identity."""
    topo = seq.topology
    if offsets is None:
        offsets = rest_offsets_for(topo)
    n, J = seq.frame_count, topo.joint_count
    rots = np.tile(np.eye(3), (n, J, 1, 1))
    for c, j in enumerate(topo.descriptor_order):
        rots[:, j] = euler_to_matrix(seq.frames[:, :, c])
    return fk_positions(topo, rots, offsets)


def hinge_joints(topology: SkeletonTopology) -> tuple[int, ...]:
    """Joints with both a parent and a child, where a bend angle is defined."""
    return tuple(
        j
        for j in topology.topo_order
        if topology.parents[j] != -1 and topology.children(j)
    )


def feature_names(topology: SkeletonTopology) -> list[str]:
    names = []
    for stat in ("speed_mean", "speed_max", "accel_mean", "accel_max"):
        names += [f"{stat}.{n}" for n in topology.names]
    for stat in ("angle_mean", "angle_max"):
        names += [f"{stat}.{topology.names[j]}" for j in hinge_joints(topology)]
    names += ["volume_mean", "volume_max"]
    return names


def extract_features(
    positions: np.ndarray, sample_rate: float, topology: SkeletonTopology
) -> np.ndarray:
    """Sequence of joint positions (n, J, 3) -> fixed-length feature vector."""
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    if positions.ndim != 3 or positions.shape[1:] != (topology.joint_count, 3):
        raise FeatureError(
            f"positions must be (n, {topology.joint_count}, 3), got {positions.shape}"
        )
    if n < 3:
        raise FeatureError(f"need at least 3 frames for acceleration stats, got {n}")

    vel = np.diff(positions, axis=0) * sample_rate
    speed = np.linalg.norm(vel, axis=2)  # (n-1, J)
    acc = np.diff(positions, n=2, axis=0) * sample_rate * sample_rate
    acc_mag = np.linalg.norm(acc, axis=2)  # (n-2, J)

    angles = []
    for j in hinge_joints(topology):
        p = topology.parents[j]
        c = topology.children(j)[0]
        u = positions[:, p] - positions[:, j]
        v = positions[:, c] - positions[:, j]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        dot = np.sum(u * v, axis=1)
        ok = (np.linalg.norm(u, axis=1) > 1e-12) & (np.linalg.norm(v, axis=1) > 1e-12)
        angles.append(np.where(ok, np.arctan2(cross, dot), 0.0))
    angles = np.stack(angles, axis=1) if angles else np.zeros((n, 0))

    extent = positions.max(axis=1) - positions.min(axis=1)  # (n, 3)
    volume = np.prod(extent, axis=1)

    return np.concatenate(
        [
            speed.mean(axis=0),
            speed.max(axis=0),
            acc_mag.mean(axis=0),
            acc_mag.max(axis=0),
            angles.mean(axis=0),
            angles.max(axis=0),
            [volume.mean(), volume.max()],
        ]
    )


def features_for_items(items) -> np.ndarray:
    """Feature matrix (len(items), d) for a corpus of LabeledSequences."""
    rows = []
    for item in items:
        pos = positions_from_sequence(item.sequence)
        rows.append(extract_features(pos, item.sequence.sample_rate, item.sequence.topology))
    return np.stack(rows)


# ------------------------------------------------------------------- the svr


@dataclass(frozen=True)
class SvrConfig:
    epsilon: float = 0.02
    l2: float = 1e-4
    epochs: int = 300
    batch_size: int = 64
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.epsilon < 0.5:
            raise ConfigError("epsilon must lie in [0, 0.5)")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class LinearSvr:
    weights: np.ndarray  # over kept (standardized) dimensions
    bias: float
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    kept: np.ndarray  # boolean mask over raw dimensions


def svr_fit(features: np.ndarray, labels: np.ndarray, config: SvrConfig) -> LinearSvr:
    """Epsilon-insensitive linear SVR via deterministic mini-batch
    subgradient descent on the standardized features."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or len(y) != x.shape[0]:
        raise FeatureError(f"features {x.shape} do not match {len(y)} labels")
    if x.shape[0] < 2:
        raise FeatureError("need at least 2 training items")

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    kept = scale > 1e-12
    if not np.any(kept):
        raise FeatureError("every feature dimension is constant on this training set")
    dropped = int(np.count_nonzero(~kept))
    if dropped:
        warnings.warn(
            f"dropping {dropped} zero-variance feature dimensions", stacklevel=2
        )
    z = (x[:, kept] - mean[kept]) / scale[kept]

    rng = np.random.default_rng(config.seed)
    n, d = z.shape
    w = np.zeros(d)
    b = 0.0
    for epoch in range(config.epochs):
        lr = config.learning_rate / (1.0 + 4.0 * epoch / config.epochs)
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            err = z[idx] @ w + b - y[idx]
            sign = np.sign(err) * (np.abs(err) > config.epsilon)
            gw = config.l2 * w + (sign @ z[idx]) / len(idx)
            gb = float(sign.mean())
            w -= lr * gw
            b -= lr * gb
    return LinearSvr(weights=w, bias=b, feature_mean=mean, feature_scale=scale, kept=kept)


def _standardize(reg: LinearSvr, x: np.ndarray) -> np.ndarray:
    return (x[:, reg.kept] - reg.feature_mean[reg.kept]) / reg.feature_scale[reg.kept]


def svr_predict_many(reg: LinearSvr, features: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=float))
    if x.shape[1] != reg.kept.size:
        raise FeatureError(
            f"feature width {x.shape[1]} does not match regressor ({reg.kept.size})"
        )
    raw = _standardize(reg, x) @ reg.weights + reg.bias
    return np.clip(raw, 0.0, 1.0)


def svr_predict(reg: LinearSvr, feature: np.ndarray) -> float:
    return float(svr_predict_many(reg, feature)[0])


def save_svr(reg: LinearSvr, path, vocabulary, topology: SkeletonTopology) -> None:
    """Store the regressor in the shared checkpoint container."""
    from .model import write_container

    header = {
        "model_kind": "linear_svr",
        "joint_count": topology.joint_count,
        "column_order": [topology.names[j] for j in topology.descriptor_order],
        "emotion_vocabulary": list(vocabulary),
    }
    write_container(
        path,
        header,
        {
            "feature_mean": reg.feature_mean,
            "feature_scale": reg.feature_scale,
            "kept": reg.kept.astype(float),
            "weights": reg.weights,
            "bias": np.array([reg.bias]),
        },
    )


def load_svr(path):
    from .errors import CheckpointError
    from .model import read_container

    header, tensors = read_container(path)
    if header.get("model_kind") != "linear_svr":
        raise CheckpointError(
            f"checkpoint holds a {header.get('model_kind')!r} model, expected 'linear_svr'"
        )
    try:
        reg = LinearSvr(
            weights=tensors["weights"],
            bias=float(tensors["bias"][0]),
            feature_mean=tensors["feature_mean"],
            feature_scale=tensors["feature_scale"],
            kept=tensors["kept"] > 0.5,
        )
    except KeyError as e:
        raise CheckpointError(f"checkpoint missing tensor {e}") from None
    return reg, header
