"""Canonical skeleton and sensor profiles.

Every sensor's skeleton is reduced to one canonical 14-joint body so that
descriptors computed from different devices line up feature-for-feature. A
profile names the source topology and maps each canonical joint to a source
joint; reduction composes the source local transforms along the collapsed
path, which leaves the mapped joints' sensor-frame poses unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTopologyError
from .kinematics import ROOT_PARENT, RigidTransform, SkeletonTopology, compose

CANONICAL = SkeletonTopology(
    names=(
        "root",
        "spine",
        "neck",
        "head",
        "l_shoulder",
        "l_elbow",
        "l_wrist",
        "r_shoulder",
        "r_elbow",
        "r_wrist",
        "l_hip",
        "l_knee",
        "r_hip",
        "r_knee",
    ),
    # shoulders hang off the spine, not the neck, matching depth-camera rigs
    parents=(-1, 0, 1, 2, 1, 4, 5, 1, 7, 8, 0, 10, 0, 12),
    mirror_pairs=((4, 7), (5, 8), (6, 9), (10, 12), (11, 13)),
)

# rest-pose bone offsets in the parent frame, meters; left/right partners are
# exact x-reflections of each other (required by the mirroring transform)
CANONICAL_REST_OFFSETS = np.array(
    [
        [0.0, 0.0, 0.0],  # root
        [0.0, 0.22, 0.0],  # spine
        [0.0, 0.28, 0.0],  # neck
        [0.0, 0.16, 0.0],  # head
        [0.19, 0.24, 0.0],  # l_shoulder
        [0.27, 0.0, 0.0],  # l_elbow
        [0.25, 0.0, 0.0],  # l_wrist
        [-0.19, 0.24, 0.0],  # r_shoulder
        [-0.27, 0.0, 0.0],  # r_elbow
        [-0.25, 0.0, 0.0],  # r_wrist
        [0.10, -0.06, 0.0],  # l_hip
        [0.0, -0.44, 0.0],  # l_knee
        [-0.10, -0.06, 0.0],  # r_hip
        [0.0, -0.44, 0.0],  # r_knee
    ]
)
CANONICAL_REST_OFFSETS.setflags(write=False)


@dataclass(frozen=True)
class SensorProfile:
    """A source skeleton plus the canonical-name -> source-name joint map."""

    name: str
    topology: SkeletonTopology
    joint_map: dict[str, str]

    # per canonical joint, the source indices whose locals compose into it
    reduction_paths: tuple[tuple[int, ...], ...] = field(
        init=False, compare=False, repr=False
    )

    def __post_init__(self):
        canon = CANONICAL
        missing = [n for n in canon.names if n not in self.joint_map]
        if missing:
            raise InvalidTopologyError(
                f"profile {self.name!r} does not map canonical joints {missing}"
            )
        src = self.topology
        mapped = {n: src.index_of(self.joint_map[n]) for n in canon.names}

        paths = []
        for j, name in enumerate(canon.names):
            p = canon.parents[j]
            target = mapped[name]
            # walk up the source tree until the mapped parent (or the source
            # root's parent for the canonical root)
            stop = mapped[canon.names[p]] if p != ROOT_PARENT else ROOT_PARENT
            path = [target]
            k = src.parents[target]
            while k != stop:
                if k == ROOT_PARENT:
                    raise InvalidTopologyError(
                        f"profile {self.name!r}: source joint "
                        f"{self.joint_map[name]!r} is not below its mapped "
                        f"canonical parent"
                    )
                path.append(k)
                k = src.parents[k]
            paths.append(tuple(reversed(path)))

        for l, r in canon.mirror_pairs:
            sl, sr = mapped[canon.names[l]], mapped[canon.names[r]]
            if src.mirror_of(sl) != sr:
                raise InvalidTopologyError(
                    f"profile {self.name!r}: canonical mirror pair "
                    f"({canon.names[l]}, {canon.names[r]}) maps to source "
                    f"joints that are not mirror partners"
                )

        object.__setattr__(self, "reduction_paths", tuple(paths))


def reduce_to_canonical(
    profile: SensorProfile, locals_: list[RigidTransform]
) -> list[RigidTransform]:
    """Collapse one frame of source local transforms onto the canonical
    skeleton. Mapped joints keep their exact sensor-frame pose."""
    if len(locals_) != profile.topology.joint_count:
        raise InvalidTopologyError(
            f"profile {profile.name!r} expects {profile.topology.joint_count} "
            f"transforms, got {len(locals_)}"
        )
    out = []
    for path in profile.reduction_paths:
        t = locals_[path[0]]
        for k in path[1:]:
            t = compose(t, locals_[k])
        out.append(t)
    return out


# Kinect v2 SDK skeleton: 25 joints, SDK index order. Note Neck's parent
# (SpineShoulder, 20) has a higher index than Neck itself.
KINECT25 = SkeletonTopology(
    names=(
        "SpineBase",
        "SpineMid",
        "Neck",
        "Head",
        "ShoulderLeft",
        "ElbowLeft",
        "WristLeft",
        "HandLeft",
        "ShoulderRight",
        "ElbowRight",
        "WristRight",
        "HandRight",
        "HipLeft",
        "KneeLeft",
        "AnkleLeft",
        "FootLeft",
        "HipRight",
        "KneeRight",
        "AnkleRight",
        "FootRight",
        "SpineShoulder",
        "HandTipLeft",
        "ThumbLeft",
        "HandTipRight",
        "ThumbRight",
    ),
    parents=(-1, 0, 20, 2, 20, 4, 5, 6, 20, 8, 9, 10, 0, 12, 13, 14, 0, 16, 17, 18, 1, 7, 7, 11, 11),
    mirror_pairs=(
        (4, 8),
        (5, 9),
        (6, 10),
        (7, 11),
        (12, 16),
        (13, 17),
        (14, 18),
        (15, 19),
        (21, 23),
        (22, 24),
    ),
)

KINECT25_PROFILE = SensorProfile(
    name="kinect25",
    topology=KINECT25,
    joint_map={
        "root": "SpineBase",
        "spine": "SpineMid",
        "neck": "Neck",
        "head": "Head",
        "l_shoulder": "ShoulderLeft",
        "l_elbow": "ElbowLeft",
        "l_wrist": "WristLeft",
        "r_shoulder": "ShoulderRight",
        "r_elbow": "ElbowRight",
        "r_wrist": "WristRight",
        "l_hip": "HipLeft",
        "l_knee": "KneeLeft",
        "r_hip": "HipRight",
        "r_knee": "KneeRight",
    },
)

# 23-joint marker-based skeleton with clavicles, hands, ankles and feet
MPI23 = SkeletonTopology(
    names=(
        "root",
        "spine_low",
        "spine_high",
        "neck",
        "head",
        "l_clavicle",
        "l_shoulder",
        "l_elbow",
        "l_wrist",
        "l_hand",
        "r_clavicle",
        "r_shoulder",
        "r_elbow",
        "r_wrist",
        "r_hand",
        "l_hip",
        "l_knee",
        "l_ankle",
        "l_foot",
        "r_hip",
        "r_knee",
        "r_ankle",
        "r_foot",
    ),
    parents=(-1, 0, 1, 2, 3, 2, 5, 6, 7, 8, 2, 10, 11, 12, 13, 0, 15, 16, 17, 0, 19, 20, 21),
    mirror_pairs=(
        (5, 10),
        (6, 11),
        (7, 12),
        (8, 13),
        (9, 14),
        (15, 19),
        (16, 20),
        (17, 21),
        (18, 22),
    ),
)

MPI23_PROFILE = SensorProfile(
    name="mpi23",
    topology=MPI23,
    joint_map={
        "root": "root",
        "spine": "spine_low",
        "neck": "neck",
        "head": "head",
        "l_shoulder": "l_shoulder",
        "l_elbow": "l_elbow",
        "l_wrist": "l_wrist",
        "r_shoulder": "r_shoulder",
        "r_elbow": "r_elbow",
        "r_wrist": "r_wrist",
        "l_hip": "l_hip",
        "l_knee": "l_knee",
        "r_hip": "r_hip",
        "r_knee": "r_knee",
    },
)

PROFILES = {p.name: p for p in (KINECT25_PROFILE, MPI23_PROFILE)}


def get_profile(name: str) -> SensorProfile:
    try:
        return PROFILES[name]
    except KeyError:
        known = ", ".join(sorted(PROFILES))
        raise InvalidTopologyError(f"unknown sensor profile {name!r} (known: {known})") from None
