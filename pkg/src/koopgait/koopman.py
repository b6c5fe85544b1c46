"""Koopman motion model: Fourier observables, EDMD training, next-frame
skeleton prediction, and the transition factor used in the pose graph.

The lifted observable vector for a 7-vector xbar (one coordinate of the
normalized skeleton) is

    Psi(xbar) = [ xbar ; cos(pi c_m^T xbar) for every coefficient vector c_m ]

with c_m ranging over {0..order}^7 in lexicographic order (first entry most
significant). For order 1 this gives 7 + 2^7 = 135 entries, and a Koopman
matrix of shape 135 x 135 per activity. A single matrix per activity is
shared across the x/y/z coordinates by default (training pairs pooled);
per-coordinate matrices are available as a training switch.

Skeletons enter the model centered on the right foot of the earlier frame
and scaled by global c_min/c_max bounds; predictions are mapped back with
the same anchor, which makes prediction exactly equivariant to rigid
translation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .activity import ACTIVITY_NAMES, NUM_ACTIVITIES
from .errors import DataError
from .factorgraph import Factor, len_key, root_key, rot_key
from .sensors import _frame_kinematics
from .skeleton import (
    NUM_JOINTS,
    NormalizationParams,
    RIGHT_FOOT,
    SkeletonModel,
    WORLD_UP,
    all_joint_jacobians,
    forward_kinematics,
    normalize,
    denormalize,
    rotate_points,
)

MAX_BASIS_SIZE = 1_000_000


@dataclass(frozen=True)
class FourierBasis:
    """Univariate Fourier cosine basis over {0..order}^dim coefficients."""

    dim: int
    order: int
    coeffs: np.ndarray  # ((order+1)^dim, dim) integer coefficient vectors

    @property
    def num_fourier(self) -> int:
        return self.coeffs.shape[0]

    @property
    def lifted_dim(self) -> int:
        """Identity block plus one cosine per coefficient vector."""
        return self.dim + self.num_fourier


def enumerate_basis(dim: int, order: int) -> FourierBasis:
    """All coefficient vectors in {0..order}^dim, lexicographic, c0 most significant."""
    if dim < 1 or order < 0:
        raise ValueError("need dim >= 1 and order >= 0")
    count = (order + 1) ** dim
    if count > MAX_BASIS_SIZE:
        raise ValueError(f"basis would have {count} functions (limit {MAX_BASIS_SIZE})")
    coeffs = np.array(list(itertools.product(range(order + 1), repeat=dim)), dtype=float)
    return FourierBasis(dim, order, coeffs)


def eval_observables(xbar, basis: FourierBasis) -> np.ndarray:
    """Lifted vector [xbar; cos(pi C xbar)] in enumeration order."""
    xbar = np.asarray(xbar, dtype=float).reshape(basis.dim)
    return np.concatenate([xbar, np.cos(np.pi * (basis.coeffs @ xbar))])


def eval_observables_batch(x, basis: FourierBasis) -> np.ndarray:
    """Column-wise lifting of samples x with shape (m, dim) -> (lifted, m)."""
    x = np.asarray(x, dtype=float)
    return np.vstack([x.T, np.cos(np.pi * (basis.coeffs @ x.T))])


def observables_jacobian(xbar, basis: FourierBasis) -> np.ndarray:
    """d Psi / d xbar, shape (lifted_dim, dim): [I; -sin(pi C x) * pi * C]."""
    xbar = np.asarray(xbar, dtype=float).reshape(basis.dim)
    s = np.sin(np.pi * (basis.coeffs @ xbar))
    return np.vstack([np.eye(basis.dim), -np.pi * s[:, None] * basis.coeffs])


def train_edmd(x, y, basis: FourierBasis, ridge: float = 1e-8) -> np.ndarray:
    """Ridge-regularized EDMD fit K = (Psi_Y Psi_X^T)(Psi_X Psi_X^T + ridge I)^-1.

    x, y: (m, dim) state pairs with y the successor of x. Minimizes
    sum ||Psi(y) - K Psi(x)||^2 + ridge ||K||_F^2. Deterministic.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 2 or x.shape[1] != basis.dim:
        raise ValueError(f"expected matching (m, {basis.dim}) pair arrays")
    psi_x = eval_observables_batch(x, basis)
    psi_y = eval_observables_batch(y, basis)
    gram = psi_x @ psi_x.T
    cross = psi_x @ psi_y.T
    p = basis.lifted_dim
    if x.shape[0] < p:
        import warnings

        warnings.warn(
            f"EDMD has {x.shape[0]} pairs for a {p}-dimensional lifting; "
            "the fit is underdetermined",
            stacklevel=2,
        )
    try:
        factor = scipy.linalg.cho_factor(gram + ridge * np.eye(p), lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "singular EDMD Gram matrix; raise the ridge parameter"
        ) from exc
    return scipy.linalg.cho_solve(factor, cross).T


@dataclass
class KoopmanBank:
    """Per-activity Koopman matrices with their shared lifting and scaling."""

    basis: FourierBasis
    params: NormalizationParams
    ridge: float
    matrices: list  # per activity: (lifted, lifted) or (3, lifted, lifted), or None
    per_coordinate: bool = False

    def matrix(self, activity: int, coord: int) -> np.ndarray:
        if not 0 <= activity < NUM_ACTIVITIES:
            raise ValueError(f"activity id {activity} out of range")
        k = self.matrices[activity]
        if k is None:
            raise DataError(f"no Koopman matrix trained for activity "
                            f"{ACTIVITY_NAMES[activity]!r}")
        return k[coord] if self.per_coordinate else k

    def trained_activities(self) -> list:
        return [a for a, k in enumerate(self.matrices) if k is not None]


def predict_next(joints, bank: KoopmanBank, activity: int) -> np.ndarray:
    """One-step skeleton prediction in meters.

    Normalizes with the current frame's right-foot anchor, advances each
    coordinate through the activity's Koopman matrix (first 7 rows), stacks,
    and denormalizes with the same anchor.
    """
    joints = np.asarray(joints, dtype=float).reshape(NUM_JOINTS, 3)
    anchor = joints[RIGHT_FOOT].copy()
    xbar = normalize(joints, bank.params, anchor)
    pred = np.empty_like(xbar)
    for coord in range(3):
        k_top = bank.matrix(activity, coord)[:NUM_JOINTS]
        pred[:, coord] = k_top @ eval_observables(xbar[:, coord], bank.basis)
    return denormalize(pred, bank.params, anchor)


# ---------------------------------------------------------------------------
# Bank training from keyframe pair datasets


def augment_pair(joints_k, joints_k1, angle: float, vertical_axis=WORLD_UP):
    """Rotate a frame-k-anchored pair about the vertical axis through the anchor."""
    anchor = np.asarray(joints_k, dtype=float)[RIGHT_FOOT]
    a = rotate_points(joints_k, vertical_axis, angle, center=anchor)
    b = rotate_points(joints_k1, vertical_axis, angle, center=anchor)
    return a, b


def build_pair_dataset(joint_pairs, labels, rotations: int = 24,
                       vertical_axis=WORLD_UP):
    """Centered, rotation-augmented training pairs grouped by activity.

    joint_pairs: iterable of (joints_k, joints_k1) in meters; both frames are
    centered on the right foot of the earlier frame. Each pair is duplicated
    at `rotations` evenly spaced angles about the vertical axis (the original
    orientation included). Returns (per-activity centered pair list, bounds).
    """
    per_activity = {a: [] for a in range(NUM_ACTIVITIES)}
    lo, hi = np.inf, -np.inf
    angles = np.arange(rotations) * (2.0 * np.pi / rotations)
    for (jk, jk1), label in zip(joint_pairs, labels):
        jk = np.asarray(jk, dtype=float)
        jk1 = np.asarray(jk1, dtype=float)
        anchor = jk[RIGHT_FOOT].copy()
        ck, ck1 = jk - anchor, jk1 - anchor
        for angle in angles:
            ak = rotate_points(ck, vertical_axis, angle) if angle else ck
            ak1 = rotate_points(ck1, vertical_axis, angle) if angle else ck1
            per_activity[int(label)].append((ak, ak1))
            lo = min(lo, float(ak.min()), float(ak1.min()))
            hi = max(hi, float(ak.max()), float(ak1.max()))
    if not np.isfinite(lo):
        raise DataError("empty Koopman training dataset")
    return per_activity, NormalizationParams(lo, hi)


def train_bank(joint_pairs, labels, order: int = 1, ridge: float = 1e-8,
               rotations: int = 24, per_coordinate: bool = False,
               vertical_axis=WORLD_UP) -> KoopmanBank:
    """EDMD-train one Koopman matrix per activity from keyframe pairs."""
    per_activity, params = build_pair_dataset(joint_pairs, labels, rotations,
                                              vertical_axis)
    basis = enumerate_basis(NUM_JOINTS, order)
    span = params.span
    matrices = []
    for activity in range(NUM_ACTIVITIES):
        pairs = per_activity[activity]
        if not pairs:
            matrices.append(None)
            continue
        xk = np.stack([p[0] for p in pairs])  # (m, 7, 3) centered
        xk1 = np.stack([p[1] for p in pairs])
        xk = (xk - params.c_min) / span
        xk1 = (xk1 - params.c_min) / span
        if per_coordinate:
            ks = np.stack([
                train_edmd(xk[:, :, c], xk1[:, :, c], basis, ridge) for c in range(3)
            ])
            matrices.append(ks)
        else:
            x = np.concatenate([xk[:, :, c] for c in range(3)])
            y = np.concatenate([xk1[:, :, c] for c in range(3)])
            matrices.append(train_edmd(x, y, basis, ridge))
    return KoopmanBank(basis, params, ridge, matrices, per_coordinate)


def pairs_from_keyframes(joints_seq, labels_seq):
    """Adjacent-keyframe pairs labeled by the earlier frame."""
    pairs, labels = [], []
    for k in range(len(joints_seq) - 1):
        pairs.append((joints_seq[k], joints_seq[k + 1]))
        labels.append(int(labels_seq[k]))
    return pairs, labels


def save_bank(bank: KoopmanBank, path) -> None:
    payload = {
        "format": "koopgait-koopman-bank",
        "version": 1,
        "dim": bank.basis.dim,
        "order": bank.basis.order,
        "enumeration": "lexicographic, first coefficient most significant, "
                       "identity block first",
        "c_min": bank.params.c_min,
        "c_max": bank.params.c_max,
        "ridge": bank.ridge,
        "per_coordinate": bank.per_coordinate,
        "activities": list(ACTIVITY_NAMES),
        "matrices": {
            ACTIVITY_NAMES[a]: (None if k is None else k.tolist())
            for a, k in enumerate(bank.matrices)
        },
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_bank(path) -> KoopmanBank:
    with open(path) as f:
        payload = json.load(f)
    if payload.get("format") != "koopgait-koopman-bank":
        raise DataError(f"{path} is not a Koopman bank file")
    if tuple(payload["activities"]) != ACTIVITY_NAMES:
        raise DataError("activity set in bank file does not match")
    basis = enumerate_basis(int(payload["dim"]), int(payload["order"]))
    matrices = []
    for name in ACTIVITY_NAMES:
        k = payload["matrices"][name]
        matrices.append(None if k is None else np.array(k, dtype=float))
    return KoopmanBank(
        basis,
        NormalizationParams(float(payload["c_min"]), float(payload["c_max"])),
        float(payload["ridge"]),
        matrices,
        bool(payload.get("per_coordinate", False)),
    )


# ---------------------------------------------------------------------------
# The transition factor


def koopman_residual(joints_k, joints_k1, bank: KoopmanBank, activity: int) -> np.ndarray:
    """21-vector prediction residual (joint-major): predicted(k+1) - actual(k+1)."""
    pred = predict_next(joints_k, bank, activity)
    return (pred - np.asarray(joints_k1, dtype=float)).reshape(-1)


class KoopmanTransitionFactor(Factor):
    """Prediction prior between adjacent keyframes.

    The activity is fixed at construction (the classifier acts as a constant
    selector; no gradient flows through it). Jacobians chain the
    normalization, lifting, Koopman multiplication and de-normalization,
    including the right-foot anchor terms, onto the per-joint forward
    kinematics derivative blocks.
    """

    def __init__(self, frame_k: int, frame_k1: int, model: SkeletonModel,
                 bank: KoopmanBank, activity: int, sigma: float):
        keys = [root_key(frame_k)]
        keys += [rot_key(frame_k, li) for li in range(len(model.links))]
        keys += [root_key(frame_k1)]
        keys += [rot_key(frame_k1, li) for li in range(len(model.links))]
        keys += [len_key(li) for li in range(len(model.links))]
        super().__init__(keys, 3 * NUM_JOINTS, self.isotropic_information(sigma))
        if activity not in bank.trained_activities():
            raise DataError(f"no Koopman matrix for activity id {activity}")
        self.frame_k, self.frame_k1 = frame_k, frame_k1
        self.model, self.bank, self.activity = model, bank, activity

    def residual(self, values, memo=None):
        _, _, joints_k = _frame_kinematics(values, self.frame_k, self.model, memo)
        _, _, joints_k1 = _frame_kinematics(values, self.frame_k1, self.model, memo)
        return koopman_residual(joints_k, joints_k1, self.bank, self.activity)

    def jacobians(self, values, memo=None):
        model, bank = self.model, self.bank
        state_k, lengths, joints_k = _frame_kinematics(values, self.frame_k, model, memo)
        state_k1, _, _ = _frame_kinematics(values, self.frame_k1, model, memo)
        jk = all_joint_jacobians(state_k, lengths, model)
        jk1 = all_joint_jacobians(state_k1, lengths, model)
        anchor = joints_k[RIGHT_FOOT]
        xbar = normalize(joints_k, bank.params, anchor)
        # per-coordinate composed map: span * K7 @ dPsi/dxbar, with the span
        # cancelling the 1/span inside dN/dX
        g = []
        for coord in range(3):
            k_top = bank.matrix(self.activity, coord)[:NUM_JOINTS]
            g.append(k_top @ observables_jacobian(xbar[:, coord], bank.basis))
        ones = np.ones((NUM_JOINTS, 1))

        def frame_block(key, jacs, frame):
            """(7, dim) per-coordinate rows of d(joint coords)/d(key) at one frame."""
            if key.kind == "root":
                if key.frame != frame:
                    return None
                return np.stack([j.root for j in jacs])  # (7, 3, dim)
            if key.kind == "rot":
                if key.frame != frame:
                    return None
                return np.stack([j.rotations[key.link] for j in jacs])
            return np.stack([j.lengths[key.link][:, None] for j in jacs])

        out = {}
        for key in self.keys:
            block = np.zeros((3 * NUM_JOINTS, key.dim))
            bk = frame_block(key, jk, self.frame_k)
            if bk is not None:
                for coord in range(3):
                    dx = bk[:, coord, :]  # (7, dim)
                    da = dx[RIGHT_FOOT : RIGHT_FOOT + 1]  # anchor row (1, dim)
                    term = g[coord] @ (dx - ones @ da) + ones @ da
                    block[coord::3] += term
            bk1 = frame_block(key, jk1, self.frame_k1)
            if bk1 is not None:
                for coord in range(3):
                    block[coord::3] -= bk1[:, coord, :]
            out[key] = block
        return out
