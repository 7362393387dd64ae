"""Real-time inference over a frame stream.

A session buffers incoming skeleton frames, converts each to a descriptor
row, and every `hop` frames (once `window` frames are buffered) runs the
estimator over the last `window` frames with the current emotion context.
Estimates are thresholded into weak/strong behavior tags: weak intensities
get speech feedback, strong ones gestural feedback.

Wire protocol (version 1): one JSON object per line.
  in:  {"v":1,"type":"frame","t_ms":<number>,"joints":[[w,x,y,z,tx,ty,tz]...],
        "emotion":"joy"?}
  out: {"v":1,"type":"estimate","t_ms":...,"value":...}
       {"v":1,"type":"tag","t_ms":...,"emotion":...,"level":...,"action":...}
The emotion field is optional and out-of-band: it updates the session's
context (initially the first vocabulary entry) for all later estimates.
"""

from __future__ import annotations

import json
import socketserver
from dataclasses import dataclass
from collections import deque

import numpy as np

from . import STREAM_PROTOCOL_VERSION
from .dataset import EmotionContext
from .errors import ConfigError, InvalidRotationError, StreamProtocolError
from .kinematics import (
    RigidTransform,
    Rotation,
    SkeletonTopology,
    matrix_to_euler,
)
from .model import ModelParams, forward_batch
from .skeletons import SensorProfile, reduce_to_canonical


@dataclass(frozen=True)
class FrameMessage:
    t_ms: float
    joints: np.ndarray  # (source_joint_count, 7) rows [w,x,y,z,tx,ty,tz]
    emotion: str | None = None


@dataclass(frozen=True)
class BehaviorTag:
    emotion: str
    level: str  # "weak" | "strong"
    action_class: str  # "speech" | "gesture"

    def __post_init__(self):
        pairs = {"weak": "speech", "strong": "gesture"}
        if self.level not in pairs or pairs[self.level] != self.action_class:
            raise ConfigError(
                f"invalid tag: level {self.level!r} with action {self.action_class!r}"
            )


def classify_level(value: float, threshold: float, emotion: str) -> BehaviorTag:
    """Below the threshold the intensity is weak (speech feedback); at or
    above it, strong (gestural feedback)."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")
    if value < threshold:
        return BehaviorTag(emotion, "weak", "speech")
    return BehaviorTag(emotion, "strong", "gesture")


class StreamSession:
    """One per stream: holds the frame buffer, the emotion context, and the
    last timestamp. Not shared between threads; every connection gets its
    own session."""

    def __init__(
        self,
        params: ModelParams,
        vocabulary,
        topology: SkeletonTopology,
        profile: SensorProfile | None = None,
        window: int = 90,
        hop: int = 15,
        threshold: float = 0.5,
    ):
        if window < 1 or hop < 1:
            raise ConfigError("window and hop must be >= 1")
        if not 0.0 < threshold < 1.0:
            raise ConfigError(f"threshold must lie in (0, 1), got {threshold}")
        if topology.joint_count != params.joint_count:
            raise ConfigError(
                f"model expects {params.joint_count} joints, topology has "
                f"{topology.joint_count}"
            )
        vocabulary = tuple(vocabulary)
        if len(vocabulary) != params.emotion_count:
            raise ConfigError("vocabulary size does not match the model")
        self.params = params
        self.vocabulary = vocabulary
        self.topology = topology
        self.profile = profile
        self.window = window
        self.hop = hop
        self.threshold = threshold
        self.source_joint_count = (
            profile.topology.joint_count if profile else topology.joint_count
        )
        self.emotion = EmotionContext.from_name(vocabulary, vocabulary[0])
        self.buffer = deque(maxlen=window)
        self.frame_count = 0
        self.last_t_ms = None

    def _descriptor_row(self, joints: np.ndarray) -> np.ndarray:
        locals_ = [
            RigidTransform(
                Rotation.from_quaternion(joints[j, :4], atol=1e-3), joints[j, 4:]
            )
            for j in range(self.source_joint_count)
        ]
        if self.profile is not None:
            locals_ = reduce_to_canonical(self.profile, locals_)
        mats = np.stack(
            [locals_[j].rotation.matrix for j in self.topology.descriptor_order]
        )
        return matrix_to_euler(mats).reshape(-1)  # row-per-joint: r,p,y,r,p,y,...

    def process(self, frame: FrameMessage):
        """Feed one frame; returns (estimate, BehaviorTag) when a window
        boundary is reached, else None."""
        if self.last_t_ms is not None and frame.t_ms < self.last_t_ms:
            raise StreamProtocolError(
                f"timestamp {frame.t_ms} goes backwards (last {self.last_t_ms})"
            )
        self.last_t_ms = frame.t_ms

        joints = np.asarray(frame.joints, dtype=float)
        if joints.shape != (self.source_joint_count, 7):
            raise StreamProtocolError(
                f"expected {self.source_joint_count} joints of 7 values, got {joints.shape}"
            )
        if frame.emotion is not None:
            if frame.emotion not in self.vocabulary:
                raise StreamProtocolError(
                    f"unknown emotion {frame.emotion!r} "
                    f"(vocabulary: {', '.join(self.vocabulary)})"
                )
            self.emotion = EmotionContext.from_name(self.vocabulary, frame.emotion)

        try:
            self.buffer.append(self._descriptor_row(joints))
        except InvalidRotationError as e:
            raise StreamProtocolError(f"frame at t_ms={frame.t_ms}: {e}") from None
        self.frame_count += 1

        if self.frame_count < self.window:
            return None
        if (self.frame_count - self.window) % self.hop != 0:
            return None

        x = np.stack(self.buffer)[None]  # (1, window, F)
        mask = np.ones((1, x.shape[1]))
        value = float(forward_batch(self.params, x, mask, self.emotion.vector[None])[0])
        return value, classify_level(value, self.threshold, self.emotion.name)


# ------------------------------------------------------------- wire protocol


def parse_frame_line(line: str) -> FrameMessage:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise StreamProtocolError(f"invalid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise StreamProtocolError("message must be a JSON object")
    if obj.get("v") != STREAM_PROTOCOL_VERSION:
        raise StreamProtocolError(
            f"unsupported protocol version {obj.get('v')!r} "
            f"(expected {STREAM_PROTOCOL_VERSION})"
        )
    if obj.get("type") != "frame":
        raise StreamProtocolError(f"unsupported message type {obj.get('type')!r}")
    for key in ("t_ms", "joints"):
        if key not in obj:
            raise StreamProtocolError(f"frame missing field {key!r}")
    try:
        joints = np.asarray(obj["joints"], dtype=float)
    except ValueError:
        raise StreamProtocolError("joints must be numeric rows of 7 values") from None
    emotion = obj.get("emotion")
    if emotion is not None and not isinstance(emotion, str):
        raise StreamProtocolError("emotion must be a string")
    return FrameMessage(t_ms=float(obj["t_ms"]), joints=joints, emotion=emotion)


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def format_estimate(t_ms: float, value: float) -> str:
    return _dump(
        {"v": STREAM_PROTOCOL_VERSION, "type": "estimate", "t_ms": t_ms, "value": value}
    )


def format_tag(t_ms: float, tag: BehaviorTag) -> str:
    return _dump(
        {
            "v": STREAM_PROTOCOL_VERSION,
            "type": "tag",
            "t_ms": t_ms,
            "emotion": tag.emotion,
            "level": tag.level,
            "action": tag.action_class,
        }
    )


def handle_line(session: StreamSession, line: str) -> list[str]:
    """One input line -> zero or more output lines."""
    line = line.strip()
    if not line:
        return []
    frame = parse_frame_line(line)
    result = session.process(frame)
    if result is None:
        return []
    value, tag = result
    return [format_estimate(frame.t_ms, value), format_tag(frame.t_ms, tag)]


def serve_stdio(session: StreamSession, in_stream, out_stream) -> None:
    """Blocking loop over an input text stream; protocol errors propagate to
    the caller (the CLI maps them to a data-error exit)."""
    for line in in_stream:
        for out in handle_line(session, line):
            out_stream.write(out + "\n")
        out_stream.flush()


def serve_tcp(session_factory, host: str, port: int):
    """One session per connection; a protocol error closes that connection
    with an error line without disturbing the others. Returns the server;
    call serve_forever() on it (or shutdown() from another thread)."""

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            session = session_factory()
            for raw in self.rfile:
                try:
                    outs = handle_line(session, raw.decode("utf-8"))
                except StreamProtocolError as e:
                    msg = _dump(
                        {"v": STREAM_PROTOCOL_VERSION, "type": "error", "message": str(e)}
                    )
                    self.wfile.write((msg + "\n").encode("utf-8"))
                    return
                for out in outs:
                    self.wfile.write((out + "\n").encode("utf-8"))
                self.wfile.flush()

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    return Server((host, port), Handler)
