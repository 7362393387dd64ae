"""Pose descriptors: per-joint local-rotation Euler angles.

A descriptor frame is a 3 x (joint_count - 1) matrix, rows (roll, pitch,
yaw), one column per non-root joint in depth-first tree order. Translations
and the root rotation are dropped, which makes the descriptor invariant to
sensor placement and bone lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, RateError
from .kinematics import (
    RigidTransform,
    SkeletonTopology,
    euler_to_matrix,
    matrix_to_euler,
)

# sagittal reflection: negate x in each local frame
_MIRROR = np.diag([-1.0, 1.0, 1.0])
# elementwise signs of M @ R @ M for M = diag(-1, 1, 1)
_MIRROR_SIGNS = np.array([[1.0, -1.0, -1.0], [-1.0, 1.0, 1.0], [-1.0, 1.0, 1.0]])


def _freeze(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PoseFrame:
    """One pose: 3 x (joint_count - 1) Euler angles in [-pi, pi]."""

    angles: np.ndarray

    def __post_init__(self):
        a = _freeze(self.angles)
        if a.ndim != 2 or a.shape[0] != 3:
            raise DimensionError(f"pose frame must be 3 x columns, got {a.shape}")
        if np.any(np.abs(a) > np.pi + 1e-12):
            raise DimensionError("pose frame angles must lie in [-pi, pi]")
        object.__setattr__(self, "angles", a)


@dataclass(frozen=True, eq=False)
class PoseSequence:
    """Stack of descriptor frames at a fixed sample rate.

    frames has shape (frame_count, 3, joint_count - 1); columns follow
    topology.descriptor_order.
    """

    frames: np.ndarray
    sample_rate: float
    topology: SkeletonTopology
    source: str = ""

    def __post_init__(self):
        f = _freeze(self.frames)
        m = self.topology.joint_count - 1
        if f.ndim != 3 or f.shape[1:] != (3, m):
            raise DimensionError(
                f"sequence frames must be (n, 3, {m}) for this topology, got {f.shape}"
            )
        if f.shape[0] < 1:
            raise DimensionError("a pose sequence needs at least one frame")
        if not np.all(np.isfinite(f)):
            raise DimensionError("sequence contains non-finite angles")
        if np.any(np.abs(f) > np.pi + 1e-12):
            raise DimensionError("sequence angles must lie in [-pi, pi]")
        if not self.sample_rate > 0:
            raise RateError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "frames", f)

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])

    def frame(self, i: int) -> PoseFrame:
        return PoseFrame(self.frames[i])


def extract_descriptor(
    locals_sequence,
    topology: SkeletonTopology,
    sample_rate: float,
    source: str = "",
) -> PoseSequence:
    """Per-frame local transforms -> descriptor sequence.

    locals_sequence is an iterable of frames, each a list of one
    RigidTransform (or Rotation matrix) per joint. Only the rotations of
    non-root joints survive.
    """
    order = topology.descriptor_order
    rows = []
    for fi, frame in enumerate(locals_sequence):
        if len(frame) != topology.joint_count:
            raise DimensionError(
                f"frame {fi}: expected {topology.joint_count} transforms, got {len(frame)}"
            )
        mats = np.stack(
            [
                frame[j].rotation.matrix if isinstance(frame[j], RigidTransform) else frame[j]
                for j in order
            ]
        )
        rows.append(matrix_to_euler(mats).T)  # (3, J-1)
    if not rows:
        raise DimensionError("empty transform sequence")
    return PoseSequence(np.stack(rows), sample_rate, topology, source)


def mirror_swap(seq: PoseSequence) -> PoseSequence:
    """Left/right body swap.

    Each local rotation is conjugated by the sagittal reflection
    (R' = M R M, M = diag(-1,1,1)), then mirror-pair columns trade places;
    midline joints are reflected in place. Pose labels are unaffected by
    construction, so augmentation copies them.
    """
    topo = seq.topology
    order = topo.descriptor_order
    col_of = {j: c for c, j in enumerate(order)}

    mats = euler_to_matrix(np.moveaxis(seq.frames, 1, 2))  # (n, J-1, 3, 3)
    reflected = mats * _MIRROR_SIGNS  # elementwise M R M

    out = np.empty_like(reflected)
    for c, j in enumerate(order):
        out[:, col_of[topo.mirror_of(j)]] = reflected[:, c]

    angles = np.moveaxis(matrix_to_euler(out), 1, 2)  # back to (n, 3, J-1)
    return replace(seq, frames=angles)


def phase_subsample(seq: PoseSequence, target_rate: float) -> list[PoseSequence]:
    """Split one sequence into `stride` phase-shifted sequences at a lower
    rate: output k keeps frames k, k+stride, k+2*stride, ...

    The outputs partition the input frames exactly.
    """
    stride_f = seq.sample_rate / target_rate
    stride = int(round(stride_f))
    if not target_rate > 0 or abs(stride_f - stride) > 1e-9 or stride < 1:
        raise RateError(
            f"sample rate {seq.sample_rate} is not an integer multiple of "
            f"target rate {target_rate}"
        )
    if seq.frame_count < stride:
        raise RateError(
            f"cannot subsample {seq.frame_count} frames with stride {stride}"
        )
    return [
        replace(seq, frames=seq.frames[k::stride], sample_rate=float(target_rate))
        for k in range(stride)
    ]
