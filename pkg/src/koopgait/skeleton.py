"""Lower-body kinematic tree, forward kinematics, and joint normalization.

The skeleton is a directed tree of 7 joints and 6 links rooted at the
sternum. Each link carries a time-invariant length and a rotation whose
z-axis points along the link from parent to child, so a child position is

    n_child = n_parent + length * R @ e3.

Joint order (normative for all 21-vectors and files):
    0 sternum, 1 right hip, 2 right knee, 3 right foot,
    4 left hip, 5 left knee, 6 left foot.

World frame convention used by the simulator and estimator: camera optical
frame with x right, y down, z forward (depth). Gravity is +y and the
vertical axis for rotation augmentation is y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .so3 import E3, check_rotation, so3_exp

JOINT_NAMES = (
    "sternum",
    "right_hip",
    "right_knee",
    "right_foot",
    "left_hip",
    "left_knee",
    "left_foot",
)
LINKS = ((0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6))
NUM_JOINTS = 7
NUM_LINKS = 6
ROOT_JOINT = 0
RIGHT_FOOT = 3

# Up direction in the camera-optical world frame (y points down).
WORLD_UP = np.array([0.0, -1.0, 0.0])


@dataclass(frozen=True)
class SkeletonModel:
    """Directed kinematic tree with fixed joint/link indexing."""

    joint_names: tuple = JOINT_NAMES
    links: tuple = LINKS
    root: int = ROOT_JOINT
    right_foot: int = RIGHT_FOOT

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.links) != n - 1:
            raise ValueError("a tree over n joints needs n-1 links")
        if self.right_foot != 3:
            raise ValueError("right foot joint index must be 3")
        parents = {}
        for li, (i, j) in enumerate(self.links):
            if j in parents or j == self.root:
                raise ValueError("every non-root joint needs exactly one parent")
            parents[j] = li
        if set(parents) != set(range(n)) - {self.root}:
            raise ValueError("links do not form a tree rooted at the root joint")
        # reachability in link order implies topological order for FK
        placed = {self.root}
        for i, j in self.links:
            if i not in placed:
                raise ValueError("links must be listed parent before child")
            placed.add(j)
        object.__setattr__(self, "_parent_link", parents)

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    def parent_link(self, joint: int):
        """Index of the link whose child is `joint`, or None for the root."""
        return self._parent_link.get(joint)

    def chain_links(self, joint: int) -> tuple:
        """Link indices on the path from the root down to `joint`."""
        chain = []
        j = joint
        while j != self.root:
            li = self._parent_link[j]
            chain.append(li)
            j = self.links[li][0]
        return tuple(reversed(chain))

    def hop_distance(self, joint: int) -> int:
        return len(self.chain_links(joint))


def default_skeleton() -> SkeletonModel:
    return SkeletonModel()


def check_lengths(lengths) -> np.ndarray:
    lengths = np.asarray(lengths, dtype=float)
    if lengths.shape != (NUM_LINKS,):
        raise ValueError(f"expected {NUM_LINKS} link lengths, got shape {lengths.shape}")
    if not np.all(lengths > 0.0):
        raise ValueError("link lengths must be strictly positive")
    return lengths


@dataclass
class GaitState:
    """Root position plus one rotation per link (the optimization variable)."""

    root: np.ndarray
    rotations: np.ndarray  # (6, 3, 3)

    def __post_init__(self):
        self.root = np.asarray(self.root, dtype=float).reshape(3)
        self.rotations = np.asarray(self.rotations, dtype=float).reshape(NUM_LINKS, 3, 3)

    def validate(self, tol: float = 1e-10) -> None:
        for r in self.rotations:
            check_rotation(r, tol)

    def copy(self) -> "GaitState":
        return GaitState(self.root.copy(), self.rotations.copy())

    @classmethod
    def identity(cls, root=(0.0, 0.0, 0.0)) -> "GaitState":
        return cls(np.asarray(root, dtype=float), np.tile(np.eye(3), (NUM_LINKS, 1, 1)))


@dataclass(frozen=True)
class NormalizationParams:
    """Global scalar coordinate bounds used by the [0, 1] scaling map."""

    c_min: float
    c_max: float

    def __post_init__(self):
        if not np.isfinite(self.c_min) or not np.isfinite(self.c_max):
            raise ValueError("normalization bounds must be finite")
        if self.c_max <= self.c_min:
            raise ValueError("c_max must be strictly greater than c_min")

    @property
    def span(self) -> float:
        return self.c_max - self.c_min


def forward_kinematics(state: GaitState, lengths, model: SkeletonModel) -> np.ndarray:
    """Joint positions (7, 3) from root position, link rotations and lengths."""
    lengths = check_lengths(lengths)
    joints = np.zeros((model.num_joints, 3))
    joints[model.root] = state.root
    for li, (i, j) in enumerate(model.links):
        joints[j] = joints[i] + lengths[li] * (state.rotations[li] @ E3)
    return joints


@dataclass
class JointJacobians:
    """Derivative blocks of one joint position w.r.t. the state variables.

    Rotation blocks follow the right-perturbation convention R <- R @ Exp(delta).
    Non-ancestor links get zero blocks.
    """

    root: np.ndarray  # (3, 3)
    rotations: np.ndarray  # (6, 3, 3)
    lengths: np.ndarray  # (6, 3)


def joint_jacobians(state: GaitState, lengths, model: SkeletonModel, joint_index: int) -> JointJacobians:
    lengths = check_lengths(lengths)
    if not 0 <= joint_index < model.num_joints:
        raise ValueError(f"invalid joint index {joint_index}")
    rot_blocks = np.zeros((NUM_LINKS, 3, 3))
    len_blocks = np.zeros((NUM_LINKS, 3))
    for li in model.chain_links(joint_index):
        r = state.rotations[li]
        # d(l R e3)/d delta for R <- R Exp(delta): columns (-R e2, R e1, 0)
        rot_blocks[li, :, 0] = -r[:, 1] * lengths[li]
        rot_blocks[li, :, 1] = r[:, 0] * lengths[li]
        len_blocks[li] = r[:, 2]
    return JointJacobians(np.eye(3), rot_blocks, len_blocks)


def all_joint_jacobians(state: GaitState, lengths, model: SkeletonModel) -> list:
    return [joint_jacobians(state, lengths, model, j) for j in range(model.num_joints)]


def normalize(joints, params: NormalizationParams, anchor=None) -> np.ndarray:
    """Center joints on the right foot (or `anchor`) and scale into [0, 1].

    Applied per joint per coordinate. With the default anchor the right foot
    maps exactly to (-c_min) / (c_max - c_min) in every coordinate.
    """
    joints = np.asarray(joints, dtype=float)
    if anchor is None:
        anchor = joints[RIGHT_FOOT]
    return ((joints - anchor) - params.c_min) / params.span


def denormalize(joints_normalized, params: NormalizationParams, anchor) -> np.ndarray:
    """Exact inverse of `normalize` with the supplied centering point."""
    joints_normalized = np.asarray(joints_normalized, dtype=float)
    anchor = np.asarray(anchor, dtype=float)
    return joints_normalized * params.span + params.c_min + anchor


def flatten_joints(joints) -> np.ndarray:
    """(7, 3) -> joint-major 21-vector (x0, y0, z0, x1, ...)."""
    return np.asarray(joints, dtype=float).reshape(-1)


def unflatten_joints(vec) -> np.ndarray:
    return np.asarray(vec, dtype=float).reshape(NUM_JOINTS, 3)


def rotate_points(points, axis, angle: float, center=None) -> np.ndarray:
    """Rotate points (n, 3) about the line through `center` along `axis`."""
    points = np.asarray(points, dtype=float)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    r = so3_exp(axis * angle)
    if center is None:
        return points @ r.T
    center = np.asarray(center, dtype=float)
    return (points - center) @ r.T + center
