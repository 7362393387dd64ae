"""Rigid-body math for skeleton trees.

Conventions used everywhere in this package:

- rotations are 3x3 orthonormal matrices; a joint's rotation maps vectors
  from its own frame into its parent's frame
- Euler angles are (roll, pitch, yaw) with R = Rz(yaw) @ Ry(pitch) @ Rx(roll)
  (extrinsic x-y-z), every angle in [-pi, pi]
- quaternions are (w, x, y, z), unit norm
- at gimbal lock (|pitch| = pi/2) the canonical extraction sets roll = 0 and
  folds the free angle into yaw
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, InvalidRotationError, InvalidTopologyError

EULER_CONVENTION = "Rz(yaw)Ry(pitch)Rx(roll)"

ROOT_PARENT = -1

# cos(pitch) below this is treated as gimbal lock (|pitch - pi/2| ~ 1e-7)
_GIMBAL_COS = 1e-7

_ORTHONORMAL_TOL = 1e-9


def euler_to_matrix(angles: np.ndarray) -> np.ndarray:
    """Euler triples (..., 3) as (roll, pitch, yaw) -> matrices (..., 3, 3)."""
    angles = np.asarray(angles, dtype=float)
    cr, sr = np.cos(angles[..., 0]), np.sin(angles[..., 0])
    cp, sp = np.cos(angles[..., 1]), np.sin(angles[..., 1])
    cy, sy = np.cos(angles[..., 2]), np.sin(angles[..., 2])
    m = np.empty(angles.shape[:-1] + (3, 3), dtype=float)
    m[..., 0, 0] = cy * cp
    m[..., 0, 1] = cy * sp * sr - sy * cr
    m[..., 0, 2] = cy * sp * cr + sy * sr
    m[..., 1, 0] = sy * cp
    m[..., 1, 1] = sy * sp * sr + cy * cr
    m[..., 1, 2] = sy * sp * cr - cy * sr
    m[..., 2, 0] = -sp
    m[..., 2, 1] = cp * sr
    m[..., 2, 2] = cp * cr
    return m


def matrix_to_euler(m: np.ndarray) -> np.ndarray:
    """Rotation matrices (..., 3, 3) -> Euler triples (..., 3).

    Pitch is taken in [-pi/2, pi/2]; at gimbal lock roll is set to 0 and the
    remaining freedom goes to yaw, so the returned triple always rebuilds the
    input matrix.
    """
    m = np.asarray(m, dtype=float)
    sp = np.clip(-m[..., 2, 0], -1.0, 1.0)
    cp = np.sqrt(np.maximum(0.0, 1.0 - sp * sp))
    locked = cp < _GIMBAL_COS

    roll = np.where(locked, 0.0, np.arctan2(m[..., 2, 1], m[..., 2, 2]))
    pitch = np.arcsin(sp)
    yaw = np.where(
        locked,
        np.arctan2(-m[..., 0, 1], m[..., 1, 1]),
        np.arctan2(m[..., 1, 0], m[..., 0, 0]),
    )
    return np.stack([roll, pitch, yaw], axis=-1)


def quaternion_to_matrix(q: np.ndarray, atol: float = 1e-6) -> np.ndarray:
    """Quaternions (..., 4) as (w, x, y, z) -> matrices (..., 3, 3).

    Inputs are renormalized; norms farther than `atol` from 1 are rejected.
    """
    q = np.asarray(q, dtype=float)
    norm = np.linalg.norm(q, axis=-1)
    if np.any(norm < 1e-12):
        raise InvalidRotationError("zero-norm quaternion")
    if np.any(np.abs(norm - 1.0) > atol):
        worst = float(np.max(np.abs(norm - 1.0)))
        raise InvalidRotationError(
            f"quaternion norm off unit by {worst:.3e} (tolerance {atol:.0e})"
        )
    w, x, y, z = np.moveaxis(q / norm[..., None], -1, 0)
    m = np.empty(q.shape[:-1] + (3, 3), dtype=float)
    m[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    m[..., 0, 1] = 2.0 * (x * y - w * z)
    m[..., 0, 2] = 2.0 * (x * z + w * y)
    m[..., 1, 0] = 2.0 * (x * y + w * z)
    m[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    m[..., 1, 2] = 2.0 * (y * z - w * x)
    m[..., 2, 0] = 2.0 * (x * z - w * y)
    m[..., 2, 1] = 2.0 * (y * z + w * x)
    m[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return m


def matrix_to_quaternion(m: np.ndarray) -> np.ndarray:
    """Single rotation matrix (3, 3) -> quaternion (w, x, y, z) with w >= 0."""
    m = np.asarray(m, dtype=float)
    trace = m[0, 0] + m[1, 1] + m[2, 2]
    if trace > 0.0:
        s = np.sqrt(trace + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] >= m[1, 1] and m[0, 0] >= m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] >= m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    q /= np.linalg.norm(q)
    if q[0] < 0.0:
        q = -q
    return q


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Rotation:
    """Immutable rotation, stored as a 3x3 orthonormal matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _freeze(self.matrix))
        if self.matrix.shape != (3, 3):
            raise DimensionError(f"rotation matrix must be 3x3, got {self.matrix.shape}")

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Rotation":
        """Validating constructor: m must be orthonormal with det +1."""
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise DimensionError(f"rotation matrix must be 3x3, got {m.shape}")
        err = np.max(np.abs(m.T @ m - np.eye(3)))
        det = np.linalg.det(m)
        if err > _ORTHONORMAL_TOL or abs(det - 1.0) > _ORTHONORMAL_TOL:
            raise InvalidRotationError(
                f"matrix is not a proper rotation (orthonormality error {err:.2e}, det {det:.12f})"
            )
        return cls(m)

    @classmethod
    def from_euler(cls, roll: float, pitch: float, yaw: float) -> "Rotation":
        return cls(euler_to_matrix(np.array([roll, pitch, yaw])))

    @classmethod
    def from_quaternion(cls, q: Sequence[float], atol: float = 1e-6) -> "Rotation":
        return cls(quaternion_to_matrix(np.asarray(q, dtype=float), atol=atol))

    def to_euler(self) -> tuple[float, float, float]:
        r, p, y = matrix_to_euler(self.matrix)
        return float(r), float(p), float(y)

    def to_quaternion(self) -> np.ndarray:
        return matrix_to_quaternion(self.matrix)

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix)


def quaternion_to_euler(q: Sequence[float], atol: float = 1e-6) -> tuple[float, float, float]:
    """Unit quaternion (w, x, y, z) -> (roll, pitch, yaw), radians."""
    return Rotation.from_quaternion(q, atol=atol).to_euler()


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation plus translation. Used both for a joint's transform relative
    to its parent (local) and for its pose in the sensor frame (global)."""

    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        t = _freeze(self.translation)
        if t.shape != (3,):
            raise DimensionError(f"translation must be a 3-vector, got {t.shape}")
        if not np.all(np.isfinite(t)):
            raise InvalidRotationError("translation must be finite")
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(Rotation.identity(), np.zeros(3))

    def inverse(self) -> "RigidTransform":
        rinv = self.rotation.inverse()
        return RigidTransform(rinv, -rinv.apply(self.translation))

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.matrix
        m[:3, 3] = self.translation
        return m

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


# Semantic aliases: a LocalTransform is relative to the parent joint frame,
# a GlobalTransform is relative to the sensor frame.
LocalTransform = RigidTransform
GlobalTransform = RigidTransform


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Homogeneous product a . b."""
    return RigidTransform(
        a.rotation @ b.rotation,
        a.rotation.apply(b.translation) + a.translation,
    )


@dataclass(frozen=True)
class SkeletonTopology:
    """Joint tree with parent links and left/right mirror pairs.

    parents[j] is the parent joint index, ROOT_PARENT (-1) for the root.
    Joint indices need not be in parent-before-child order; a topological
    order is computed at construction. Mirror pairs must be symmetric with
    respect to the tree, i.e. partners' parents must themselves be partners
    (or the shared midline joint).
    """

    names: tuple[str, ...]
    parents: tuple[int, ...]
    mirror_pairs: tuple[tuple[int, int], ...] = ()

    # derived, excluded from equality
    root_index: int = field(init=False, compare=False, repr=False)
    topo_order: tuple[int, ...] = field(init=False, compare=False, repr=False)
    descriptor_order: tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        parents = tuple(int(p) for p in self.parents)
        pairs = tuple((int(l), int(r)) for l, r in self.mirror_pairs)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "mirror_pairs", pairs)

        n = len(names)
        if n < 2:
            raise InvalidTopologyError("a skeleton needs at least 2 joints")
        if len(parents) != n:
            raise InvalidTopologyError("names and parents length mismatch")
        if len(set(names)) != n:
            raise InvalidTopologyError("joint names must be unique")

        roots = [j for j, p in enumerate(parents) if p == ROOT_PARENT]
        if len(roots) != 1:
            raise InvalidTopologyError(f"expected exactly one root, found {len(roots)}")
        root = roots[0]
        for j, p in enumerate(parents):
            if p != ROOT_PARENT and not 0 <= p < n:
                raise InvalidTopologyError(f"joint {j} has out-of-range parent {p}")
            if p == j:
                raise InvalidTopologyError(f"joint {j} is its own parent")

        children: list[list[int]] = [[] for _ in range(n)]
        for j, p in enumerate(parents):
            if p != ROOT_PARENT:
                children[p].append(j)

        # depth-first from the root, children in index order; doubles as a
        # reachability check (unreached joints mean detached cycles)
        order: list[int] = []
        stack = [root]
        while stack:
            j = stack.pop()
            order.append(j)
            stack.extend(reversed(children[j]))
        if len(order) != n:
            missing = sorted(set(range(n)) - set(order))
            raise InvalidTopologyError(f"joints not reachable from root: {missing}")

        seen: set[int] = set()
        mirror = list(range(n))
        for l, r in pairs:
            for j in (l, r):
                if not 0 <= j < n:
                    raise InvalidTopologyError(f"mirror pair index {j} out of range")
                if j in seen:
                    raise InvalidTopologyError(f"joint {j} appears in more than one mirror pair")
                seen.add(j)
            if l == r:
                raise InvalidTopologyError(f"joint {l} paired with itself")
            mirror[l], mirror[r] = r, l
        for l, r in pairs:
            pl, pr = parents[l], parents[r]
            if pl == ROOT_PARENT or pr == ROOT_PARENT:
                raise InvalidTopologyError("root cannot be part of a mirror pair")
            if mirror[pl] != pr:
                raise InvalidTopologyError(
                    f"mirror pair ({l}, {r}) is not tree-symmetric: parents {pl}, {pr}"
                )

        object.__setattr__(self, "root_index", root)
        object.__setattr__(self, "topo_order", tuple(order))
        object.__setattr__(self, "descriptor_order", tuple(j for j in order if j != root))
        object.__setattr__(self, "_children", tuple(tuple(c) for c in children))
        object.__setattr__(self, "_mirror_map", tuple(mirror))

    @property
    def joint_count(self) -> int:
        return len(self.names)

    def children(self, j: int) -> tuple[int, ...]:
        return self._children[j]

    def mirror_of(self, j: int) -> int:
        """Mirror partner of joint j, or j itself for midline joints."""
        return self._mirror_map[j]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidTopologyError(f"no joint named {name!r}") from None


def _check_length(topology: SkeletonTopology, transforms: Sequence, what: str) -> None:
    if len(transforms) != topology.joint_count:
        raise DimensionError(
            f"{what}: expected {topology.joint_count} transforms, got {len(transforms)}"
        )


def forward_kinematics(
    topology: SkeletonTopology, locals_: Sequence[RigidTransform]
) -> list[RigidTransform]:
    """Local joint transforms -> sensor-frame transforms.

    The root's local transform is taken as its sensor-frame pose; every other
    joint is the running product of local transforms along its root path,
    computed once per joint.
    """
    _check_length(topology, locals_, "forward_kinematics")
    out: list[RigidTransform | None] = [None] * topology.joint_count
    for j in topology.topo_order:
        p = topology.parents[j]
        out[j] = locals_[j] if p == ROOT_PARENT else compose(out[p], locals_[j])
    return out  # type: ignore[return-value]


def inverse_kinematics(
    topology: SkeletonTopology, globals_: Sequence[RigidTransform]
) -> list[RigidTransform]:
    """Sensor-frame transforms -> local joint transforms (exact inverse of
    forward_kinematics): each joint's local transform is its parent's global
    inverse composed with its own global."""
    _check_length(topology, globals_, "inverse_kinematics")
    out: list[RigidTransform | None] = [None] * topology.joint_count
    for j in topology.topo_order:
        p = topology.parents[j]
        out[j] = globals_[j] if p == ROOT_PARENT else compose(globals_[p].inverse(), globals_[j])
    return out  # type: ignore[return-value]


def fk_positions(
    topology: SkeletonTopology,
    rotations: np.ndarray,
    offsets: np.ndarray,
    root_position: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized position-only forward kinematics.

    rotations: (..., J, 3, 3) local rotations, offsets: (J, 3) bone
    translations in the parent frame, root_position: (..., 3) defaults to the
    origin. Returns joint positions (..., J, 3) in the sensor frame.
    """
    rotations = np.asarray(rotations, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    J = topology.joint_count
    if rotations.shape[-3:] != (J, 3, 3):
        raise DimensionError(f"rotations must end in ({J}, 3, 3), got {rotations.shape}")
    if offsets.shape != (J, 3):
        raise DimensionError(f"offsets must be ({J}, 3), got {offsets.shape}")

    lead = rotations.shape[:-3]
    glob_rot = np.empty_like(rotations)
    pos = np.empty(lead + (J, 3))
    for j in topology.topo_order:
        p = topology.parents[j]
        if p == ROOT_PARENT:
            glob_rot[..., j, :, :] = rotations[..., j, :, :]
            pos[..., j, :] = offsets[j] if root_position is None else root_position
        else:
            glob_rot[..., j, :, :] = glob_rot[..., p, :, :] @ rotations[..., j, :, :]
            pos[..., j, :] = pos[..., p, :] + np.einsum(
                "...ij,j->...i", glob_rot[..., p, :, :], offsets[j]
            )
    return pos


def rotation_between(a: np.ndarray, b: np.ndarray) -> Rotation:
    """Minimal (zero-twist) rotation taking unit vector a onto unit vector b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    c = float(np.dot(a, b))
    axis = np.cross(a, b)
    s = float(np.linalg.norm(axis))
    if s < 1e-12:
        if c > 0.0:
            return Rotation.identity()
        # antiparallel: rotate pi about any axis perpendicular to a
        perp = np.cross(a, np.array([1.0, 0.0, 0.0]))
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(a, np.array([0.0, 1.0, 0.0]))
        perp /= np.linalg.norm(perp)
        k = np.array(
            [[0.0, -perp[2], perp[1]], [perp[2], 0.0, -perp[0]], [-perp[1], perp[0], 0.0]]
        )
        return Rotation(np.eye(3) + 2.0 * (k @ k))
    axis = axis / s
    angle = np.arctan2(s, c)
    k = np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]])
    return Rotation(np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k))


def locals_from_positions(
    topology: SkeletonTopology,
    rest_offsets: np.ndarray,
    positions: np.ndarray,
) -> list[RigidTransform]:
    """Approximate local transforms from joint positions alone.

    Position-only sensors give no joint orientations, so each joint's frame
    is reconstructed by the minimal rotation aligning its first child's rest
    direction with the observed bone direction (zero-twist convention);
    leaves inherit their parent's orientation. Positions round-trip exactly
    through forward kinematics, orientations are an approximation.
    """
    positions = np.asarray(positions, dtype=float)
    rest_offsets = np.asarray(rest_offsets, dtype=float)
    J = topology.joint_count
    if positions.shape != (J, 3):
        raise DimensionError(f"positions must be ({J}, 3), got {positions.shape}")

    glob_rot: list[Rotation | None] = [None] * J
    for j in topology.topo_order:
        kids = topology.children(j)
        if kids:
            c = kids[0]
            rest_dir = rest_offsets[c]
            obs_dir = positions[c] - positions[j]
            if np.linalg.norm(rest_dir) < 1e-12 or np.linalg.norm(obs_dir) < 1e-12:
                glob_rot[j] = Rotation.identity()
            else:
                glob_rot[j] = rotation_between(rest_dir, obs_dir)
        else:
            p = topology.parents[j]
            glob_rot[j] = glob_rot[p] if p != ROOT_PARENT else Rotation.identity()

    globals_ = [RigidTransform(glob_rot[j], positions[j]) for j in range(J)]
    return inverse_kinematics(topology, globals_)
