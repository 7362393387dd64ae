"""Two-layer LSTM intensity estimator, implemented from scratch in numpy.

Per frame the descriptor matrix is flattened column-major (roll, pitch, yaw
per joint, joints in descriptor order) and fed through two LSTM layers. The
top layer's hidden state at the last real frame summarizes the sequence; a
dense layer fuses it with the one-hot emotion context and a sigmoid squashes
the result into (0, 1).

Gate layout along the 4h axis is [input, forget, cell, output]. Training is
full backpropagation through time on mean absolute error with RMSprop;
everything is float64 and bit-reproducible for a fixed (corpus, config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import CHECKPOINT_FORMAT_VERSION
from .dataset import EmotionContext, LabeledSequence
from .descriptor import PoseSequence
from .errors import (
    CheckpointError,
    ConfigError,
    DimensionError,
    NumericError,
)
from .kinematics import EULER_CONVENTION, SkeletonTopology

TENSOR_ORDER = (
    "input_weights_1",
    "recurrent_weights_1",
    "bias_1",
    "input_weights_2",
    "recurrent_weights_2",
    "bias_2",
    "head_weights",
    "head_bias",
)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class ModelParams:
    joint_count: int
    emotion_count: int
    hidden1: int
    hidden2: int
    input_weights_1: np.ndarray  # (3*(J-1), 4*h1)
    recurrent_weights_1: np.ndarray  # (h1, 4*h1)
    bias_1: np.ndarray  # (4*h1,)
    input_weights_2: np.ndarray  # (h1, 4*h2)
    recurrent_weights_2: np.ndarray  # (h2, 4*h2)
    bias_2: np.ndarray  # (4*h2,)
    head_weights: np.ndarray  # (h2 + K,)
    head_bias: np.ndarray  # (1,)

    @property
    def input_dim(self) -> int:
        return 3 * (self.joint_count - 1)

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_ORDER}

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        f, h1, h2, k = self.input_dim, self.hidden1, self.hidden2, self.emotion_count
        return {
            "input_weights_1": (f, 4 * h1),
            "recurrent_weights_1": (h1, 4 * h1),
            "bias_1": (4 * h1,),
            "input_weights_2": (h1, 4 * h2),
            "recurrent_weights_2": (h2, 4 * h2),
            "bias_2": (4 * h2,),
            "head_weights": (h2 + k,),
            "head_bias": (1,),
        }

    def validate(self):
        for name, shape in self.expected_shapes().items():
            got = getattr(self, name)
            if got.shape != shape:
                raise DimensionError(f"tensor {name} has shape {got.shape}, expected {shape}")
            if not np.all(np.isfinite(got)):
                raise NumericError(f"tensor {name} contains non-finite values")

    def copy(self) -> "ModelParams":
        return replace(self, **{n: t.copy() for n, t in self.tensors().items()})


def init_params(
    joint_count: int,
    emotion_count: int,
    hidden1: int = 64,
    hidden2: int = 128,
    rng=None,
) -> ModelParams:
    """Seeded uniform init, +-sqrt(6/(fan_in+fan_out)) per weight matrix.
    Forget-gate biases start at 1 so early gradients flow through time."""
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    f = 3 * (joint_count - 1)
    k = emotion_count

    def uniform(rows, cols):
        lim = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-lim, lim, size=(rows, cols))

    w1 = uniform(f, 4 * hidden1)
    u1 = uniform(hidden1, 4 * hidden1)
    w2 = uniform(hidden1, 4 * hidden2)
    u2 = uniform(hidden2, 4 * hidden2)
    wd = uniform(hidden2 + k, 1)[:, 0]

    b1 = np.zeros(4 * hidden1)
    b1[hidden1 : 2 * hidden1] = 1.0
    b2 = np.zeros(4 * hidden2)
    b2[hidden2 : 2 * hidden2] = 1.0

    params = ModelParams(
        joint_count=joint_count,
        emotion_count=emotion_count,
        hidden1=hidden1,
        hidden2=hidden2,
        input_weights_1=w1,
        recurrent_weights_1=u1,
        bias_1=b1,
        input_weights_2=w2,
        recurrent_weights_2=u2,
        bias_2=b2,
        head_weights=wd,
        head_bias=np.zeros(1),
    )
    params.validate()
    return params


def flatten_frames(frames: np.ndarray) -> np.ndarray:
    """(n, 3, J-1) descriptor frames -> (n, 3*(J-1)) network inputs,
    column-major per joint: r0, p0, y0, r1, p1, y1, ..."""
    n = frames.shape[0]
    return np.ascontiguousarray(frames.transpose(0, 2, 1).reshape(n, -1))


def pad_batch(batch: list[LabeledSequence]):
    """Stack variable-length items into X (B,T,F), mask (B,T), E (B,K),
    labels y (B,). Padding frames are zero and masked out."""
    if not batch:
        raise DimensionError("empty batch")
    b = len(batch)
    t = max(item.sequence.frame_count for item in batch)
    f = 3 * (batch[0].sequence.frames.shape[2])
    k = len(batch[0].emotion.vocabulary)
    x = np.zeros((b, t, f))
    mask = np.zeros((b, t))
    e = np.zeros((b, k))
    y = np.empty(b)
    for i, item in enumerate(batch):
        flat = flatten_frames(item.sequence.frames)
        if flat.shape[1] != f:
            raise DimensionError(
                f"item {item.id!r}: frame width {flat.shape[1]}, expected {f}"
            )
        if len(item.emotion.vocabulary) != k:
            raise DimensionError(f"item {item.id!r}: emotion vocabulary size differs")
        n = flat.shape[0]
        x[i, :n] = flat
        mask[i, :n] = 1.0
        e[i] = item.emotion.vector
        y[i] = item.intensity.value
    return x, mask, e, y


def _layer_forward(x, mask, w, u, b):
    """One LSTM layer over a padded batch. Masked steps freeze h and c
    exactly, so trailing padding can never change the outputs."""
    bsz, t, _ = x.shape
    h_dim = u.shape[0]
    zx = x @ w + b  # input projections for every step at once

    i_g = np.empty((bsz, t, h_dim))
    f_g = np.empty((bsz, t, h_dim))
    g_g = np.empty((bsz, t, h_dim))
    o_g = np.empty((bsz, t, h_dim))
    tc = np.empty((bsz, t, h_dim))
    c_out = np.empty((bsz, t, h_dim))
    h_out = np.empty((bsz, t, h_dim))

    h = np.zeros((bsz, h_dim))
    c = np.zeros((bsz, h_dim))
    for step in range(t):
        z = zx[:, step] + h @ u
        i = sigmoid(z[:, :h_dim])
        f = sigmoid(z[:, h_dim : 2 * h_dim])
        g = np.tanh(z[:, 2 * h_dim : 3 * h_dim])
        o = sigmoid(z[:, 3 * h_dim :])
        c_new = f * c + i * g
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c

        m = mask[:, step, None]
        c = m * c_new + (1.0 - m) * c
        h = m * h_new + (1.0 - m) * h

        i_g[:, step] = i
        f_g[:, step] = f
        g_g[:, step] = g
        o_g[:, step] = o
        tc[:, step] = tanh_c
        c_out[:, step] = c
        h_out[:, step] = h

    cache = (x, mask, w, u, i_g, f_g, g_g, o_g, tc, c_out, h_out)
    return h_out, cache


def _layer_backward(cache, d_h_out):
    """Exact BPTT for one layer. d_h_out is the gradient w.r.t. the layer's
    (post-mask) hidden outputs at every step."""
    x, mask, w, u, i_g, f_g, g_g, o_g, tc, c_out, h_out = cache
    bsz, t, h_dim = h_out.shape

    dz_all = np.empty((bsz, t, 4 * h_dim))
    dh_next = np.zeros((bsz, h_dim))
    dc_next = np.zeros((bsz, h_dim))

    for step in range(t - 1, -1, -1):
        m = mask[:, step, None]
        i, f, g, o = i_g[:, step], f_g[:, step], g_g[:, step], o_g[:, step]
        th = tc[:, step]
        c_prev = c_out[:, step - 1] if step > 0 else np.zeros((bsz, h_dim))

        dh = d_h_out[:, step] + dh_next
        dc = dc_next

        dh_cand = m * dh
        dc_cand = m * dc + dh_cand * o * (1.0 - th * th)

        do = dh_cand * th
        di = dc_cand * g
        dg = dc_cand * i
        df = dc_cand * c_prev

        dz = dz_all[:, step]
        dz[:, :h_dim] = di * i * (1.0 - i)
        dz[:, h_dim : 2 * h_dim] = df * f * (1.0 - f)
        dz[:, 2 * h_dim : 3 * h_dim] = dg * (1.0 - g * g)
        dz[:, 3 * h_dim :] = do * o * (1.0 - o)

        dh_next = dz @ u.T + (1.0 - m) * dh
        dc_next = dc_cand * f + (1.0 - m) * dc

    h_prev = np.concatenate([np.zeros((bsz, 1, h_dim)), h_out[:, :-1]], axis=1)
    flat = lambda a: a.reshape(bsz * t, -1)
    dw = flat(x).T @ flat(dz_all)
    du = flat(h_prev).T @ flat(dz_all)
    db = dz_all.sum(axis=(0, 1))
    dx = dz_all @ w.T
    return dx, dw, du, db


def _forward_full(params: ModelParams, x, mask, e):
    h1, cache1 = _layer_forward(
        x, mask, params.input_weights_1, params.recurrent_weights_1, params.bias_1
    )
    h2, cache2 = _layer_forward(
        h1, mask, params.input_weights_2, params.recurrent_weights_2, params.bias_2
    )
    d = h2[:, -1]  # masking froze the state at each item's last real frame
    u = d @ params.head_weights[: params.hidden2] + e @ params.head_weights[params.hidden2 :]
    u = u + params.head_bias[0]
    yhat = sigmoid(u)
    return yhat, d, cache1, cache2


def forward_batch(params: ModelParams, x, mask, e) -> np.ndarray:
    """Batched inference: X (B,T,F), mask (B,T), emotion one-hots (B,K) ->
    estimates (B,) in (0,1)."""
    if x.shape[2] != params.input_dim:
        raise DimensionError(
            f"input width {x.shape[2]} does not match model ({params.input_dim})"
        )
    if e.shape[1] != params.emotion_count:
        raise DimensionError(
            f"emotion width {e.shape[1]} does not match model ({params.emotion_count})"
        )
    yhat, _, _, _ = _forward_full(params, x, mask, e)
    return yhat


def forward(params: ModelParams, seq: PoseSequence, emotion: EmotionContext) -> float:
    """Single-sequence intensity estimate in the open interval (0,1)."""
    x = flatten_frames(seq.frames)[None]
    mask = np.ones((1, x.shape[1]))
    e = emotion.vector[None]
    return float(forward_batch(params, x, mask, e)[0])


def predict_many(params: ModelParams, items: list[LabeledSequence]) -> np.ndarray:
    """Estimates for a list of items, padded into one batch."""
    x, mask, e, _ = pad_batch(items)
    return forward_batch(params, x, mask, e)


def loss(params: ModelParams, batch: list[LabeledSequence]) -> float:
    """Mean absolute error over the batch."""
    x, mask, e, y = pad_batch(batch)
    yhat = forward_batch(params, x, mask, e)
    return float(np.mean(np.abs(yhat - y)))


def _loss_and_gradients(params: ModelParams, x, mask, e, y):
    bsz = x.shape[0]
    yhat, d, cache1, cache2 = _forward_full(params, x, mask, e)
    loss_val = float(np.mean(np.abs(yhat - y)))

    # MAE subgradient, sign(0) = 0
    dyhat = np.sign(yhat - y) / bsz
    du_head = dyhat * yhat * (1.0 - yhat)

    h2 = params.hidden2
    de_stack = np.concatenate([d, e], axis=1)
    d_head_w = de_stack.T @ du_head
    d_head_b = np.array([du_head.sum()])
    dd = np.outer(du_head, params.head_weights[:h2])

    dh2_all = np.zeros_like(cache2[10])
    dh2_all[:, -1] = dd
    dh1_all, dw2, du2, db2 = _layer_backward(cache2, dh2_all)
    _, dw1, du1, db1 = _layer_backward(cache1, dh1_all)

    grads = {
        "input_weights_1": dw1,
        "recurrent_weights_1": du1,
        "bias_1": db1,
        "input_weights_2": dw2,
        "recurrent_weights_2": du2,
        "bias_2": db2,
        "head_weights": d_head_w,
        "head_bias": d_head_b,
    }
    return loss_val, grads


def gradients(params: ModelParams, batch: list[LabeledSequence]) -> dict[str, np.ndarray]:
    """Exact BPTT gradient of the batch MAE for every parameter tensor."""
    x, mask, e, y = pad_batch(batch)
    _, grads = _loss_and_gradients(params, x, mask, e, y)
    return grads


# ------------------------------------------------------------------ training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 1e-3
    rms_decay: float = 0.9
    rms_epsilon: float = 1e-8
    seed: int = 0
    gradient_clip_norm: float | None = 5.0
    hidden1: int = 64
    hidden2: int = 128

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 <= self.rms_decay < 1.0:
            raise ConfigError("rms_decay must lie in [0, 1)")
        if not self.rms_epsilon > 0:
            raise ConfigError("rms_epsilon must be positive")
        if self.gradient_clip_norm is not None and not self.gradient_clip_norm > 0:
            raise ConfigError("gradient_clip_norm must be positive or None")
        if self.hidden1 < 1 or self.hidden2 < 1:
            raise ConfigError("hidden sizes must be >= 1")


def init_rms_state(params: ModelParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(t) for name, t in params.tensors().items()}


def rmsprop_step(params: ModelParams, grads, state, config: TrainConfig):
    """s <- rho*s + (1-rho)*g^2; theta <- theta - lr*g/(sqrt(s)+eps).
    Updates params and state in place and returns them."""
    for name in TENSOR_ORDER:
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in tensor {name}")
        s = state[name]
        s *= config.rms_decay
        s += (1.0 - config.rms_decay) * g * g
        getattr(params, name)[...] -= config.learning_rate * g / (np.sqrt(s) + config.rms_epsilon)
    return params, state


def clip_gradients(grads, max_norm: float):
    """Global-norm clipping across all tensors; no-op below the threshold."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return grads


def train(corpus: list[LabeledSequence], config: TrainConfig):
    """Train on a corpus; returns (params, log). Bit-reproducible for a
    fixed (corpus, config)."""
    corpus = list(corpus)
    if not corpus:
        raise ConfigError("cannot train on an empty corpus")
    topo = corpus[0].sequence.topology
    vocab = corpus[0].emotion.vocabulary
    for item in corpus:
        if item.sequence.topology != topo:
            raise DimensionError(f"item {item.id!r} has a different topology")
        if item.emotion.vocabulary != vocab:
            raise DimensionError(f"item {item.id!r} has a different emotion vocabulary")

    rng = np.random.default_rng(config.seed)
    params = init_params(
        topo.joint_count, len(vocab), config.hidden1, config.hidden2, rng
    )
    state = init_rms_state(params)

    n = len(corpus)
    epoch_losses = []
    for _ in range(config.epochs):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = [corpus[i] for i in perm[start : start + config.batch_size]]
            x, mask, e, y = pad_batch(batch)
            loss_val, grads = _loss_and_gradients(params, x, mask, e, y)
            if not np.isfinite(loss_val):
                raise NumericError(f"non-finite training loss {loss_val!r}")
            if config.gradient_clip_norm is not None:
                clip_gradients(grads, config.gradient_clip_norm)
            rmsprop_step(params, grads, state, config)
            total += loss_val * len(batch)
        epoch_losses.append(total / n)

    log = {
        "model_kind": "lstm_intensity",
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "rms_decay": config.rms_decay,
        "rms_epsilon": config.rms_epsilon,
        "gradient_clip_norm": config.gradient_clip_norm,
        "seed": config.seed,
        "hidden1": config.hidden1,
        "hidden2": config.hidden2,
        "joint_count": topo.joint_count,
        "emotion_vocabulary": list(vocab),
        "epoch_mean_loss": epoch_losses,
    }
    return params, log


# --------------------------------------------------------------- checkpoints


def write_container(path, header: dict, tensors: dict[str, np.ndarray]) -> None:
    """Shared checkpoint container: one JSON header line declaring tensor
    names and shapes, then the concatenated float64 little-endian payload."""
    header = dict(header)
    header["format_version"] = CHECKPOINT_FORMAT_VERSION
    header["tensors"] = [
        {"name": name, "shape": list(t.shape)} for name, t in tensors.items()
    ]
    blob = b"".join(
        np.ascontiguousarray(t, dtype="<f8").tobytes() for t in tensors.values()
    )
    with open(path, "wb") as f:
        f.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        f.write(b"\n")
        f.write(blob)


def read_container(path):
    """Inverse of write_container -> (header, {name: tensor})."""
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e}") from None
    nl = raw.find(b"\n")
    if nl < 0:
        raise CheckpointError("checkpoint has no header line")
    try:
        header = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError("checkpoint header is not valid JSON") from None
    version = header.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format_version {version!r} "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    decls = header.get("tensors")
    if not isinstance(decls, list):
        raise CheckpointError("checkpoint header lacks a tensor table")

    payload = raw[nl + 1 :]
    tensors = {}
    offset = 0
    for decl in decls:
        shape = tuple(int(s) for s in decl["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(payload):
            raise CheckpointError(
                f"checkpoint truncated: tensor {decl['name']!r} needs {nbytes} bytes"
            )
        arr = np.frombuffer(payload[offset : offset + nbytes], dtype="<f8").reshape(shape)
        tensors[decl["name"]] = arr.astype(float)
        offset += nbytes
    if offset != len(payload):
        raise CheckpointError(
            f"checkpoint has {len(payload) - offset} trailing bytes after the last tensor"
        )
    return header, tensors


def save_checkpoint(
    params: ModelParams,
    path,
    vocabulary,
    topology: SkeletonTopology,
) -> None:
    if topology.joint_count != params.joint_count:
        raise CheckpointError(
            f"topology has {topology.joint_count} joints, model expects {params.joint_count}"
        )
    if len(tuple(vocabulary)) != params.emotion_count:
        raise CheckpointError("vocabulary size does not match the model's emotion count")
    header = {
        "model_kind": "lstm_intensity",
        "joint_count": params.joint_count,
        "emotion_count": params.emotion_count,
        "hidden1": params.hidden1,
        "hidden2": params.hidden2,
        "euler_convention": EULER_CONVENTION,
        "column_order": [topology.names[j] for j in topology.descriptor_order],
        "emotion_vocabulary": list(vocabulary),
    }
    write_container(path, header, params.tensors())


def load_checkpoint(path):
    """-> (ModelParams, header). The header carries the emotion vocabulary
    and descriptor column order the model was trained with."""
    header, tensors = read_container(path)
    if header.get("model_kind") != "lstm_intensity":
        raise CheckpointError(
            f"checkpoint holds a {header.get('model_kind')!r} model, expected 'lstm_intensity'"
        )
    try:
        params = ModelParams(
            joint_count=int(header["joint_count"]),
            emotion_count=int(header["emotion_count"]),
            hidden1=int(header["hidden1"]),
            hidden2=int(header["hidden2"]),
            **{name: tensors[name] for name in TENSOR_ORDER},
        )
    except KeyError as e:
        raise CheckpointError(f"checkpoint missing field or tensor {e}") from None
    try:
        params.validate()
    except (DimensionError, NumericError) as e:
        raise CheckpointError(f"checkpoint inconsistent: {e}") from None
    return params, header


def check_topology_compatible(header: dict, topology: SkeletonTopology) -> None:
    """Raise when a checkpoint was trained against a different skeleton."""
    if header.get("joint_count") != topology.joint_count:
        raise CheckpointError(
            f"checkpoint expects {header.get('joint_count')} joints, "
            f"topology has {topology.joint_count}"
        )
    column_order = [topology.names[j] for j in topology.descriptor_order]
    if header.get("column_order") != column_order:
        raise CheckpointError("checkpoint descriptor column order does not match topology")
    if header.get("euler_convention") != EULER_CONVENTION:
        raise CheckpointError("checkpoint uses a different Euler convention")
