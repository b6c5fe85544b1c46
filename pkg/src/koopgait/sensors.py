"""Measurement models: IMU rotation preintegration, image-plane reprojection,
depth, and foot-contact factors, plus the logistic-regression contact detector.

The camera frame coincides with the inertial frame (static camera, identity
extrinsics), so image keypoints are (x/z, y/z) of world-frame joints and the
depth measurement is the world z coordinate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .factorgraph import Factor, VariableKey, len_key, root_key, rot_key
from .skeleton import GaitState, SkeletonModel, forward_kinematics, joint_jacobians
from .so3 import right_jacobian_inv, so3_exp, so3_log

GRAVITY = 9.81

# links instrumented with IMUs: right thigh, right shank, left thigh, left shank
IMU_LINKS = (1, 2, 4, 5)

DEFAULT_Z_MIN = 0.1


@dataclass(frozen=True)
class ImuSample:
    t: float
    gyro: np.ndarray
    accel: np.ndarray
    link: int


@dataclass
class ImuStream:
    """Time-ordered gyro/accel samples of one link's IMU."""

    link: int
    times: np.ndarray
    gyro: np.ndarray  # (n, 3) rad/s, body frame
    accel: np.ndarray  # (n, 3) m/s^2, body frame

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.gyro = np.asarray(self.gyro, dtype=float).reshape(-1, 3)
        self.accel = np.asarray(self.accel, dtype=float).reshape(-1, 3)
        if not (len(self.times) == len(self.gyro) == len(self.accel)):
            raise DataError("IMU stream arrays must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise DataError("IMU timestamps must be strictly increasing")

    def samples(self):
        for i in range(len(self.times)):
            yield ImuSample(float(self.times[i]), self.gyro[i], self.accel[i], self.link)

    def window(self, t_lo: float, t_hi: float) -> slice:
        lo = int(np.searchsorted(self.times, t_lo, side="left"))
        hi = int(np.searchsorted(self.times, t_hi, side="right"))
        return slice(lo, hi)


@dataclass
class PreintegratedRotation:
    delta_r: np.ndarray  # (3, 3)
    t_start: float
    t_end: float
    link: int
    num_samples: int

    @property
    def empty(self) -> bool:
        return self.num_samples == 0


def preintegrate_rotation(stream: ImuStream, t_start: float, t_end: float) -> PreintegratedRotation:
    """Compose gyro increments over [t_start, t_end] into a relative rotation.

    Zero-order hold between consecutive samples; the first sample also covers
    the gap back to t_start, so splitting an interval at any interior sample
    and composing the parts reproduces the whole.
    """
    if t_end <= t_start:
        raise ValueError("t_end must exceed t_start")
    sel = stream.window(t_start, t_end)
    times = stream.times[sel]
    gyro = stream.gyro[sel]
    n = len(times)
    if n == 0:
        return PreintegratedRotation(np.eye(3), t_start, t_end, stream.link, 0)
    delta = np.eye(3)
    for i in range(n):
        seg_start = t_start if i == 0 else times[i]
        seg_end = times[i + 1] if i + 1 < n else t_end
        dt = min(seg_end, t_end) - seg_start
        if dt > 0:
            delta = delta @ so3_exp(gyro[i] * dt)
    return PreintegratedRotation(delta, t_start, t_end, stream.link, n)


def imu_rotation_residual(r_k, r_k1, meas: PreintegratedRotation) -> np.ndarray:
    """r = Log(dR~^T R_k^T R_{k+1})."""
    return so3_log(meas.delta_r.T @ r_k.T @ r_k1, validate=False)


def imu_rotation_jacobians(r_k, r_k1, meas: PreintegratedRotation):
    r = imu_rotation_residual(r_k, r_k1, meas)
    jr_inv = right_jacobian_inv(r)
    rel = r_k.T @ r_k1
    return r, {-1: -jr_inv @ rel.T, +1: jr_inv}


class ImuRotationFactor(Factor):
    """Relative-rotation factor on one link between adjacent keyframes."""

    def __init__(self, frame_k: int, frame_k1: int, link: int,
                 meas: PreintegratedRotation, sigma: float):
        super().__init__([rot_key(frame_k, link), rot_key(frame_k1, link)], 3,
                         self.isotropic_information(sigma))
        self.meas = meas

    def residual(self, values, memo=None):
        return imu_rotation_residual(values[self.keys[0]], values[self.keys[1]], self.meas)

    def jacobians(self, values, memo=None):
        _, jac = imu_rotation_jacobians(values[self.keys[0]], values[self.keys[1]], self.meas)
        return {self.keys[0]: jac[-1], self.keys[1]: jac[+1]}


@dataclass(frozen=True)
class Keypoint2D:
    u: float
    v: float
    joint: int
    frame: int
    valid: bool = True


@dataclass(frozen=True)
class DepthMeasurement:
    z: float
    joint: int
    frame: int
    valid: bool = True


def image_residual(joint_pos, u: float, v: float, z_min: float = DEFAULT_Z_MIN):
    """Reprojection residual (x/z - u, y/z - v) and its 2x3 point Jacobian."""
    x, y, z = (float(c) for c in joint_pos)
    if z <= z_min:
        raise ValueError(f"joint depth {z:.3f} m at or below z_min {z_min}")
    r = np.array([x / z - u, y / z - v])
    jac = np.array([[1.0 / z, 0.0, -x / (z * z)], [0.0, 1.0 / z, -y / (z * z)]])
    return r, jac


def depth_residual(joint_pos, z_meas: float):
    """Residual z_hat - z_meas and its 1x3 point Jacobian."""
    r = np.array([float(joint_pos[2]) - z_meas])
    return r, np.array([[0.0, 0.0, 1.0]])


def contact_residual(foot_k, foot_k1):
    """Stance constraint r = foot_{k+1} - foot_k."""
    return np.asarray(foot_k1, dtype=float) - np.asarray(foot_k, dtype=float)


def state_from_values(values, frame: int, model: SkeletonModel) -> GaitState:
    rots = np.stack([values[rot_key(frame, li)] for li in range(len(model.links))])
    return GaitState(values[root_key(frame)], rots)


def lengths_from_values(values, model: SkeletonModel) -> np.ndarray:
    return np.array([float(values[len_key(li)]) for li in range(len(model.links))])


def joint_variable_keys(frame: int, joint: int, model: SkeletonModel) -> list:
    keys = [root_key(frame)]
    for li in model.chain_links(joint):
        keys.append(rot_key(frame, li))
    for li in model.chain_links(joint):
        keys.append(len_key(li))
    return keys


def _frame_kinematics(values, frame: int, model: SkeletonModel, memo=None):
    """(state, lengths, joints) for one keyframe, shared through `memo`."""
    key = ("fk", frame)
    if memo is not None and key in memo:
        return memo[key]
    state = state_from_values(values, frame, model)
    lengths = lengths_from_values(values, model)
    joints = forward_kinematics(state, lengths, model)
    entry = (state, lengths, joints)
    if memo is not None:
        memo[key] = entry
    return entry


def _chain_blocks(values, frame: int, joint: int, model: SkeletonModel, memo=None):
    """Joint position and {key: 3 x dim} blocks for the joint's ancestors."""
    state, lengths, joints = _frame_kinematics(values, frame, model, memo)
    pos = joints[joint]
    key = ("blocks", frame, joint)
    if memo is not None and key in memo:
        return pos, memo[key]
    jac = joint_jacobians(state, lengths, model, joint)
    blocks = {root_key(frame): jac.root}
    for li in model.chain_links(joint):
        blocks[rot_key(frame, li)] = jac.rotations[li]
        blocks[len_key(li)] = jac.lengths[li][:, None]
    if memo is not None:
        memo[key] = blocks
    return pos, blocks


class ImageProjectionFactor(Factor):
    def __init__(self, frame: int, joint: int, kp: Keypoint2D, model: SkeletonModel,
                 sigma: float, z_min: float = DEFAULT_Z_MIN):
        if not kp.valid:
            raise ValueError("cannot build a factor from an invalid keypoint")
        super().__init__(joint_variable_keys(frame, joint, model), 2,
                         self.isotropic_information(sigma))
        self.frame, self.joint, self.kp = frame, joint, kp
        self.model, self.z_min = model, z_min

    def residual(self, values, memo=None):
        _, _, joints = _frame_kinematics(values, self.frame, self.model, memo)
        r, _ = image_residual(joints[self.joint], self.kp.u, self.kp.v, self.z_min)
        return r

    def jacobians(self, values, memo=None):
        pos, blocks = _chain_blocks(values, self.frame, self.joint, self.model, memo)
        _, dproj = image_residual(pos, self.kp.u, self.kp.v, self.z_min)
        return {key: dproj @ block for key, block in blocks.items()}


class DepthFactor(Factor):
    def __init__(self, frame: int, joint: int, meas: DepthMeasurement,
                 model: SkeletonModel, sigma: float):
        if not meas.valid:
            raise ValueError("cannot build a factor from an invalid depth measurement")
        super().__init__(joint_variable_keys(frame, joint, model), 1,
                         self.isotropic_information(sigma))
        self.frame, self.joint, self.meas = frame, joint, meas
        self.model = model

    def residual(self, values, memo=None):
        _, _, joints = _frame_kinematics(values, self.frame, self.model, memo)
        r, _ = depth_residual(joints[self.joint], self.meas.z)
        return r

    def jacobians(self, values, memo=None):
        pos, blocks = _chain_blocks(values, self.frame, self.joint, self.model, memo)
        _, row = depth_residual(pos, self.meas.z)
        return {key: row @ block for key, block in blocks.items()}


class ContactFactor(Factor):
    """Pins a stance foot between adjacent keyframes."""

    def __init__(self, frame_k: int, frame_k1: int, foot_joint: int,
                 model: SkeletonModel, sigma: float):
        keys_k = joint_variable_keys(frame_k, foot_joint, model)
        keys_k1 = joint_variable_keys(frame_k1, foot_joint, model)
        keys = list(dict.fromkeys(keys_k + keys_k1))  # lengths shared
        super().__init__(keys, 3, self.isotropic_information(sigma))
        self.frame_k, self.frame_k1 = frame_k, frame_k1
        self.foot_joint, self.model = foot_joint, model

    def residual(self, values, memo=None):
        _, _, joints_k = _frame_kinematics(values, self.frame_k, self.model, memo)
        _, _, joints_k1 = _frame_kinematics(values, self.frame_k1, self.model, memo)
        return contact_residual(joints_k[self.foot_joint], joints_k1[self.foot_joint])

    def jacobians(self, values, memo=None):
        _, blocks_k = _chain_blocks(values, self.frame_k, self.foot_joint, self.model, memo)
        _, blocks_k1 = _chain_blocks(values, self.frame_k1, self.foot_joint, self.model, memo)
        out = {}
        for key in self.keys:
            acc = np.zeros((3, key.dim))
            if key in blocks_k:
                acc = acc - blocks_k[key]
            if key in blocks_k1:
                acc = acc + blocks_k1[key]
            out[key] = acc
        return out


# ---------------------------------------------------------------------------
# Contact detection


def imu_feature_vector(streams: dict, t_center: float, half_window: float = 0.1,
                       gravity: float = GRAVITY) -> np.ndarray:
    """Raw 8-feature vector at a keyframe.

    Per instrumented link (right thigh, right shank, left thigh, left shank):
    mean angular-velocity norm, then mean | ||accel|| - g |, both over a
    centered window. Stationary streams yield exactly zero.
    """
    feats = []
    for link in IMU_LINKS:
        if link not in streams:
            raise DataError(f"missing IMU stream for link {link}")
    for link in IMU_LINKS:
        s = streams[link]
        sel = s.window(t_center - half_window, t_center + half_window)
        if sel.stop <= sel.start:
            raise DataError(f"no IMU samples around t={t_center} for link {link}")
        feats.append(float(np.mean(np.linalg.norm(s.gyro[sel], axis=1))))
    for link in IMU_LINKS:
        s = streams[link]
        sel = s.window(t_center - half_window, t_center + half_window)
        feats.append(float(np.mean(np.abs(np.linalg.norm(s.accel[sel], axis=1) - gravity))))
    return np.array(feats)


@dataclass
class ContactModel:
    """Per-foot logistic contact classifiers over standardized IMU features."""

    weights: np.ndarray  # (2, 8): row 0 right foot, row 1 left foot
    bias: np.ndarray  # (2,)
    feat_mean: np.ndarray  # (8,)
    feat_std: np.ndarray  # (8,)
    threshold: float = 0.5

    def standardize(self, raw) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.feat_mean) / self.feat_std

    def probabilities(self, raw_features) -> np.ndarray:
        """P(contact) for (right, left) given one raw feature vector."""
        x = self.standardize(raw_features)
        z = self.weights @ x + self.bias
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, raw_features) -> np.ndarray:
        return self.probabilities(raw_features) > self.threshold


def _fit_logistic(x, y, l2: float, tol: float, max_iter: int):
    """Full-batch gradient descent with momentum on L2-regularized logistic loss."""
    n, d = x.shape
    # Lipschitz bound of the gradient: 0.25 * lambda_max(X^T X / n) + l2
    aug = np.hstack([x, np.ones((n, 1))])
    lip = 0.25 * float(np.linalg.eigvalsh(aug.T @ aug / n)[-1]) + l2
    lr = 1.0 / lip
    beta = 0.9
    w = np.zeros(d)
    b = 0.0
    vw = np.zeros(d)
    vb = 0.0
    for _ in range(max_iter):
        z = x @ w + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -35.0, 35.0)))
        err = p - y
        gw = x.T @ err / n + l2 * w
        gb = float(np.mean(err))
        gnorm = np.sqrt(float(gw @ gw) + gb * gb)
        if gnorm < tol:
            break
        vw = beta * vw - lr * gw
        vb = beta * vb - lr * gb
        w = w + vw
        b = b + vb
    return w, b


def train_contact_model(features, labels, l2: float = 1e-4, tol: float = 1e-6,
                        max_iter: int = 200000, seed: int = 0) -> ContactModel:
    """Fit the per-foot contact classifiers.

    features: (n, 8) raw feature vectors; labels: (n, 2) booleans
    (right, left). Deterministic: zero init, full-batch descent.
    """
    del seed  # deterministic fit; kept for interface stability
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float).reshape(-1, 2)
    if features.ndim != 2 or features.shape[1] != 8:
        raise DataError(f"expected (n, 8) features, got {features.shape}")
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    x = (features - mean) / std
    weights = np.zeros((2, 8))
    bias = np.zeros(2)
    for foot in range(2):
        y = labels[:, foot]
        if y.min() == y.max():
            raise DataError(f"contact training data for foot {foot} has a single class")
        weights[foot], bias[foot] = _fit_logistic(x, y, l2, tol, max_iter)
    return ContactModel(weights, bias, mean, std)


def save_contact_model(model: ContactModel, path) -> None:
    payload = {
        "format": "koopgait-contact-model",
        "version": 1,
        "weights": model.weights.tolist(),
        "bias": model.bias.tolist(),
        "feat_mean": model.feat_mean.tolist(),
        "feat_std": model.feat_std.tolist(),
        "threshold": model.threshold,
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_contact_model(path) -> ContactModel:
    with open(path) as f:
        payload = json.load(f)
    if payload.get("format") != "koopgait-contact-model":
        raise DataError(f"{path} is not a contact model file")
    return ContactModel(
        np.array(payload["weights"]),
        np.array(payload["bias"]),
        np.array(payload["feat_mean"]),
        np.array(payload["feat_std"]),
        float(payload["threshold"]),
    )
