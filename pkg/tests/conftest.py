import numpy as np
import pytest

from poseaffect.kinematics import SkeletonTopology


def random_rotation_matrix(rng):
    """Uniform-ish random rotation via a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_topology(rng, n):
    """Random joint tree with shuffled indices so parents are unordered."""
    parents_ordered = [-1] + [int(rng.integers(0, j)) for j in range(1, n)]
    perm = rng.permutation(n)
    names = [f"j{k}" for k in range(n)]
    parents = [0] * n
    for old, new in enumerate(perm):
        p = parents_ordered[old]
        parents[new] = -1 if p == -1 else int(perm[p])
    return SkeletonTopology(names=tuple(names), parents=tuple(parents))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
