"""Synthetic gait generator and sensor simulator.

Ground truth is produced in closed form on a 120 Hz grid in the camera
optical world frame (x right, y down, z forward/depth; ground plane y = 0;
gravity +y). Walking is a sagittal-plane sinusoidal gait with alternating
single support: the support foot is pinned at its foothold and the root is
derived from that constraint, so the stance foot is stationary to machine
precision and handoffs land both feet exactly on the ground. Sitting and
standing transitions interpolate leg angles with both feet pinned.

Sensors: per-link IMU streams (gyro from exact rotation differences, so
zero-noise preintegration telescopes to the true relative rotation;
accelerometer from specific force), perspective keypoints, and per-joint
depth with variance growing quadratically in distance.

Recordings serialize to JSON Lines: one header line, one line per keyframe,
then one trailing block per IMU stream. Numeric fields round-trip
bit-exactly (shortest-repr decimal floats).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .activity import ACTIVITY_NAMES, activity_id
from .errors import DataError
from .sensors import IMU_LINKS, ImuStream
from .skeleton import (
    GaitState,
    SkeletonModel,
    default_skeleton,
    forward_kinematics,
)
from .so3 import rot_x, rot_y, rot_z, so3_log

IMU_RATE = 120.0
KEYFRAME_RATE = 30.0
KEYFRAME_STRIDE = 4  # IMU ticks per keyframe

GRAVITY_VEC = np.array([0.0, 9.81, 0.0])  # points down (+y)

PELVIS_TILT = 0.35  # rad, lateral drop angle of the sternum-to-hip links

_ALLOWED_TRANSITIONS = {
    "walking": {"standing"},
    "standing": {"walking", "sitting_down"},
    "sitting_down": {"sitting"},
    "sitting": {"standing_up"},
    "standing_up": {"standing"},
}


@dataclass(frozen=True)
class ScriptSegment:
    activity: str
    duration: float
    speed: float = 1.0  # m/s, walking only
    heading: float = 0.0  # rad about the vertical axis; 0 walks along +z
    chair_height: float = 0.5  # m, sitting family only

    def __post_init__(self):
        if self.activity not in ACTIVITY_NAMES:
            raise ValueError(f"unknown activity {self.activity!r}")
        if self.duration <= 0:
            raise ValueError("segment duration must be positive")
        if self.activity == "walking" and self.speed <= 0:
            raise ValueError("walking speed must be positive")

    @property
    def label(self) -> int:
        return activity_id(self.activity)


@dataclass(frozen=True)
class ActivityScript:
    segments: tuple
    start: tuple = (0.0, 3.0)  # initial sternum (x, z); depth 3 m by default

    def __post_init__(self):
        # an empty script is allowed and produces a header-only recording
        object.__setattr__(self, "segments", tuple(self.segments))
        prev = None
        for seg in self.segments:
            if prev is not None:
                allowed = _ALLOWED_TRANSITIONS[prev.activity]
                if seg.activity not in allowed:
                    raise ValueError(
                        f"incompatible transition {prev.activity} -> {seg.activity}"
                    )
            prev = seg
        # heading is honored by walking segments only; the transition table
        # guarantees every walking segment starts the script or follows
        # standing, where the pivot about the right foothold is well defined

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))


@dataclass(frozen=True)
class GaitParams:
    """Per-subject gait shape. Lengths follow the link order of the skeleton
    (pelvis, thigh, shank for the right side, then the left side).

    hip_amplitude is the largest admissible hip swing; the actual swing is
    derived from the scripted speed and validated against it.
    """

    link_lengths: tuple = (0.35, 0.45, 0.45, 0.35, 0.45, 0.45)
    stride_frequency: float = 1.0  # Hz, full gait cycles per second
    hip_amplitude: float = 0.6  # rad
    knee_amplitude: float = 0.5  # rad, swing-phase flexion
    stance_duty: float = 0.5  # fraction of the cycle on the right foot

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.link_lengths)
        object.__setattr__(self, "link_lengths", lengths)
        if len(lengths) != 6 or any(not 0.3 <= v <= 0.6 for v in lengths):
            raise ValueError("link lengths must be six values in [0.3, 0.6] m")
        if not 0.5 <= self.stride_frequency <= 1.5:
            raise ValueError("stride frequency must be in [0.5, 1.5] Hz")
        if not 0.0 < self.hip_amplitude <= 1.2:
            raise ValueError("hip amplitude must be in (0, 1.2] rad")
        if not 0.0 < self.knee_amplitude <= 1.2:
            raise ValueError("knee amplitude must be in (0, 1.2] rad")
        if not 0.4 <= self.stance_duty <= 0.6:
            raise ValueError("stance duty must be in [0.4, 0.6]")

    @property
    def leg_length(self) -> float:
        return self.link_lengths[1] + self.link_lengths[2]


@dataclass(frozen=True)
class SensorNoiseConfig:
    keypoint_sigma: float = 0.01  # normalized image units
    depth_sigma0: float = 0.01  # m
    depth_kappa: float = 0.004  # m^-1, quadratic distance growth
    gyro_sigma: float = 0.01  # rad/s
    accel_sigma: float = 0.1  # m/s^2
    seed: int = 0

    def __post_init__(self):
        for name in ("keypoint_sigma", "depth_sigma0", "depth_kappa",
                     "gyro_sigma", "accel_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def depth_sigma(self, depth: float) -> float:
        return self.depth_sigma0 + self.depth_kappa * depth * depth

    @classmethod
    def zero(cls, seed: int = 0) -> "SensorNoiseConfig":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, seed)


# ---------------------------------------------------------------------------
# closed-form pose machinery


def _leg_dir(heading: float, pitch: float) -> np.ndarray:
    """Unit direction of a leg link: pitch 0 is straight down, positive
    pitch moves the distal end forward along the heading."""
    s, c = np.sin(pitch), np.cos(pitch)
    return np.array([s * np.sin(heading), c, s * np.cos(heading)])


def _pelvis_dir(heading: float, sign: float) -> np.ndarray:
    """Sternum-to-hip unit direction; sign +1 right hip, -1 left hip."""
    sb, cb = np.sin(PELVIS_TILT), np.cos(PELVIS_TILT)
    return np.array([sign * sb * np.cos(heading), cb, -sign * sb * np.sin(heading)])


def _rot_leg(heading: float, pitch: float) -> np.ndarray:
    return rot_y(heading) @ rot_x(pitch - np.pi / 2)


def _rot_pelvis(heading: float, sign: float) -> np.ndarray:
    return rot_y(heading) @ rot_z(-sign * PELVIS_TILT) @ rot_x(-np.pi / 2)


@dataclass
class _Pose:
    """Leg pitch angles (thigh, shank) per side; right = index 0."""

    thigh: np.ndarray  # (2,)
    shank: np.ndarray  # (2,)


def _chain_offset(heading: float, side: int, pose: _Pose, lengths) -> np.ndarray:
    sign = 1.0 if side == 0 else -1.0
    base = 0 if side == 0 else 3
    return (lengths[base] * _pelvis_dir(heading, sign)
            + lengths[base + 1] * _leg_dir(heading, pose.thigh[side])
            + lengths[base + 2] * _leg_dir(heading, pose.shank[side]))


def _pose_state(heading: float, pose: _Pose, sternum: np.ndarray) -> GaitState:
    rotations = np.stack([
        _rot_pelvis(heading, +1.0),
        _rot_leg(heading, pose.thigh[0]),
        _rot_leg(heading, pose.shank[0]),
        _rot_pelvis(heading, -1.0),
        _rot_leg(heading, pose.thigh[1]),
        _rot_leg(heading, pose.shank[1]),
    ])
    return GaitState(sternum, rotations)


def _smoothstep(u: float) -> float:
    u = min(max(u, 0.0), 1.0)
    return u * u * (3.0 - 2.0 * u)


def _sit_angles(params: GaitParams, chair_height: float):
    l_thigh, l_shank = params.link_lengths[1], params.link_lengths[2]
    shank_pitch = 0.05
    arg = (chair_height - l_shank * np.cos(shank_pitch)) / l_thigh
    if not 0.01 <= arg <= 0.995:
        raise ValueError(
            f"chair height {chair_height} m infeasible for thigh {l_thigh} m / "
            f"shank {l_shank} m"
        )
    return float(np.arccos(arg)), shank_pitch


def comfortable_chair_height(params: GaitParams) -> float:
    """A chair height partway up the thigh, feasible for any leg geometry."""
    return params.link_lengths[2] + 0.35 * params.link_lengths[1]


def _walking_amplitude(speed: float, params: GaitParams) -> float:
    arg = speed / (4.0 * params.stride_frequency * params.leg_length)
    if arg >= np.sin(min(params.hip_amplitude, 1.2)):
        raise ValueError(
            f"walking speed {speed} m/s needs a hip swing beyond the "
            f"{params.hip_amplitude} rad amplitude limit"
        )
    return float(np.arcsin(arg))


@dataclass
class GroundTruth:
    times: np.ndarray
    states: list
    joints: np.ndarray  # (n, 7, 3)
    labels: np.ndarray  # (n,)
    contacts: np.ndarray  # (n, 2) bool, (right, left)


class _SegmentEngine:
    """Evaluates one script segment on the shared carried state."""

    def __init__(self, seg: ScriptSegment, params: GaitParams, carried, is_first,
                 prev_activity, next_activity):
        self.seg = seg
        self.params = params
        self.lengths = np.asarray(params.link_lengths)
        self.heading = seg.heading if seg.activity == "walking" else carried["heading"]
        if is_first:
            self.heading = seg.heading
        carried["heading"] = self.heading
        self.carried = carried
        act = seg.activity
        if act == "walking":
            self.amp = _walking_amplitude(seg.speed, params)
            self.ramp_in = prev_activity == "standing"
            self.ramp_out = next_activity == "standing"
            self.tau = min(0.5, seg.duration / 3.0)
            self.duty = params.stance_duty
            self.freq = params.stride_frequency
            self.support = 0
            if is_first:
                pose = self._angles(0.0)
                _init_grounded(carried, self.heading, pose, self.lengths)
            # pin the right foothold where the right foot currently is
            carried["footholds"][0] = carried["feet"][0].copy()
            self._events = self._make_events(seg.duration)
            self._next_event = 0
        elif act in ("standing", "sitting"):
            if act == "sitting":
                thigh, shank = _sit_angles(params, seg.chair_height)
            else:
                thigh, shank = 0.0, 0.0
            self.pose_const = _Pose(np.array([thigh, thigh]), np.array([shank, shank]))
            if is_first:
                _init_grounded(carried, self.heading, self.pose_const, self.lengths)
        else:  # sitting_down / standing_up
            sit_thigh, sit_shank = _sit_angles(params, seg.chair_height)
            stand = (0.0, 0.0)
            sit = (sit_thigh, sit_shank)
            self.pose_from, self.pose_to = (stand, sit) if act == "sitting_down" else (sit, stand)
            if is_first:
                pose = self._interp_pose(0.0)
                _init_grounded(carried, self.heading, pose, self.lengths)

    # -- walking internals

    def _envelope(self, t: float) -> float:
        env = 1.0
        if self.ramp_in:
            env *= _smoothstep(t / self.tau)
        if self.ramp_out:
            env *= _smoothstep((self.seg.duration - t) / self.tau)
        return env

    def _angles(self, t: float) -> _Pose:
        env = self._envelope(t)
        a = self.amp * env
        knee = self.params.knee_amplitude * env
        c = (self.freq * t) % 1.0
        duty = self.duty
        if c < duty:
            th_r = a * np.cos(np.pi * c / duty)
            k_r = 0.0
            th_l = -a * np.cos(np.pi * c / duty)
            k_l = knee * np.sin(np.pi * c / duty) ** 2
        else:
            s = (c - duty) / (1.0 - duty)
            th_r = -a * np.cos(np.pi * s)
            k_r = knee * np.sin(np.pi * s) ** 2
            th_l = a * np.cos(np.pi * s)
            k_l = 0.0
        thigh = np.array([th_r, th_l])
        shank = np.array([th_r - k_r, th_l - k_l])
        return _Pose(thigh, shank)

    def _boundary_angles(self, t: float, entering: int) -> _Pose:
        a = self.amp * self._envelope(t)
        th = np.array([a, -a]) if entering == 0 else np.array([-a, a])
        return _Pose(th, th.copy())

    def _make_events(self, duration: float):
        events = []
        n_cycles = int(np.ceil(self.freq * duration)) + 1
        for k in range(n_cycles + 1):
            te = (k + self.duty) / self.freq
            if 0.0 < te <= duration:
                events.append((te, 1))  # left takes over
            te = (k + 1.0) / self.freq
            if 0.0 < te <= duration:
                events.append((te, 0))  # right takes over
        events.sort()
        return events

    def _process_events(self, t: float):
        carried = self.carried
        while self._next_event < len(self._events) and self._events[self._next_event][0] <= t:
            te, entering = self._events[self._next_event]
            self._next_event += 1
            if entering == self.support:
                continue
            pose = self._boundary_angles(te, entering)
            old = self.support
            sternum = carried["footholds"][old] - _chain_offset(
                self.heading, old, pose, self.lengths
            )
            carried["footholds"][entering] = sternum + _chain_offset(
                self.heading, entering, pose, self.lengths
            )
            self.support = entering

    # -- shared evaluation

    def _interp_pose(self, t: float) -> _Pose:
        u = _smoothstep(t / self.seg.duration)
        thigh = self.pose_from[0] + u * (self.pose_to[0] - self.pose_from[0])
        shank = self.pose_from[1] + u * (self.pose_to[1] - self.pose_from[1])
        return _Pose(np.array([thigh, thigh]), np.array([shank, shank]))

    def eval(self, t: float):
        """Pose, sternum, feet and contact flags at segment-local time t."""
        act = self.seg.activity
        carried = self.carried
        if act == "walking":
            self._process_events(t)
            pose = self._angles(t)
            ref = self.support
            contacts = np.array([ref == 0, ref == 1])
        else:
            pose = self.pose_const if act in ("standing", "sitting") else self._interp_pose(t)
            ref = 0
            contacts = np.array([True, True])
        sternum = carried["footholds"][ref] - _chain_offset(self.heading, ref, pose, self.lengths)
        feet = np.stack([
            sternum + _chain_offset(self.heading, 0, pose, self.lengths),
            sternum + _chain_offset(self.heading, 1, pose, self.lengths),
        ])
        return pose, sternum, feet, contacts

    def finalize(self):
        pose, sternum, feet, _ = self.eval(self.seg.duration)
        self.carried["feet"] = feet
        self.carried["footholds"] = feet.copy()


def _init_grounded(carried, heading, pose: _Pose, lengths):
    """Place the skeleton at the script start with both feet on the ground."""
    x0, z0 = carried["start"]
    chain_r = _chain_offset(heading, 0, pose, lengths)
    sternum = np.array([x0, -chain_r[1], z0])
    feet = np.stack([
        sternum + chain_r,
        sternum + _chain_offset(heading, 1, pose, lengths),
    ])
    carried["feet"] = feet
    carried["footholds"] = feet.copy()


def generate_trajectory(script: ActivityScript, params: GaitParams, seed: int = 0,
                        rate: float = IMU_RATE,
                        model: SkeletonModel | None = None) -> GroundTruth:
    """Closed-form ground truth sampled on the IMU grid.

    The generator is fully deterministic; the seed is accepted for interface
    symmetry with the sensor simulators and ignored.
    """
    del seed
    model = model or default_skeleton()
    lengths = np.asarray(params.link_lengths)
    if not script.segments:
        return GroundTruth(np.zeros(0), [], np.zeros((0, model.num_joints, 3)),
                           np.zeros(0, dtype=int), np.zeros((0, 2), dtype=bool))
    n_ticks = int(round(script.duration * rate)) + 1
    times = np.arange(n_ticks) / rate
    seg_ends = np.cumsum([s.duration for s in script.segments])
    seg_starts = np.concatenate([[0.0], seg_ends[:-1]])
    carried = {"start": np.asarray(script.start, dtype=float), "heading": 0.0,
               "feet": None, "footholds": None}
    states, labels, contacts = [], [], []
    joints = np.zeros((n_ticks, model.num_joints, 3))
    tick = 0
    for si, seg in enumerate(script.segments):
        prev_act = script.segments[si - 1].activity if si > 0 else None
        next_act = script.segments[si + 1].activity if si + 1 < len(script.segments) else None
        engine = _SegmentEngine(seg, params, carried, si == 0, prev_act, next_act)
        t_end = seg_ends[si]
        while tick < n_ticks and (times[tick] < t_end or si == len(script.segments) - 1):
            t_loc = times[tick] - seg_starts[si]
            if t_loc > seg.duration + 1e-12:
                break
            pose, sternum, _, contact = engine.eval(min(t_loc, seg.duration))
            state = _pose_state(engine.heading, pose, sternum)
            states.append(state)
            joints[tick] = forward_kinematics(state, lengths, model)
            labels.append(seg.label)
            contacts.append(contact)
            tick += 1
        engine.finalize()
    if tick != n_ticks:
        raise RuntimeError("internal tick accounting error")
    return GroundTruth(times, states, joints, np.array(labels, dtype=int),
                       np.array(contacts, dtype=bool))


# ---------------------------------------------------------------------------
# sensor simulation


def simulate_imu(truth: GroundTruth, noise: SensorNoiseConfig,
                 rng: np.random.Generator | None = None,
                 model: SkeletonModel | None = None) -> dict:
    """IMU streams for the two thighs and two shanks.

    Gyro comes from forward rotation differences at the grid rate, so
    zero-noise preintegration over any span of ticks reproduces the true
    relative rotation. Accelerometer is body-frame specific force from
    central second differences of the link midpoint.
    """
    rng = rng or np.random.default_rng(noise.seed)
    model = model or default_skeleton()
    n = len(truth.times)
    if n < 2:
        return {}
    rate = 1.0 / (truth.times[1] - truth.times[0])
    streams = {}
    for link in IMU_LINKS:
        i, j = model.links[link]
        rots = np.stack([s.rotations[link] for s in truth.states])
        gyro = np.zeros((n, 3))
        for t in range(n - 1):
            gyro[t] = so3_log(rots[t].T @ rots[t + 1]) * rate
        if n > 1:
            gyro[n - 1] = gyro[n - 2]
        mid = 0.5 * (truth.joints[:, i] + truth.joints[:, j])
        acc_world = np.zeros((n, 3))
        if n > 2:
            acc_world[1:-1] = (mid[2:] - 2.0 * mid[1:-1] + mid[:-2]) * rate * rate
            acc_world[0] = acc_world[1]
            acc_world[-1] = acc_world[-2]
        accel = np.einsum("tij,tj->ti", rots.transpose(0, 2, 1), acc_world - GRAVITY_VEC)
        gyro = gyro + rng.normal(scale=noise.gyro_sigma, size=gyro.shape)
        accel = accel + rng.normal(scale=noise.accel_sigma, size=accel.shape)
        streams[link] = ImuStream(link, truth.times.copy(), gyro, accel)
    return streams


def simulate_camera(joints, noise: SensorNoiseConfig,
                    rng: np.random.Generator | None = None, z_min: float = 0.1):
    """Perspective keypoints and depths with distance-growing depth noise."""
    rng = rng or np.random.default_rng(noise.seed)
    joints = np.asarray(joints, dtype=float)
    k, nj, _ = joints.shape
    z = joints[:, :, 2]
    valid = z > z_min
    safe_z = np.where(valid, z, 1.0)
    keypoints = np.stack([joints[:, :, 0] / safe_z, joints[:, :, 1] / safe_z], axis=2)
    keypoints = keypoints + rng.normal(scale=noise.keypoint_sigma, size=keypoints.shape)
    sigma_d = noise.depth_sigma0 + noise.depth_kappa * z * z
    depths = z + rng.normal(size=z.shape) * sigma_d
    keypoints[~valid] = np.nan
    depths[~valid] = np.nan
    return keypoints, valid, depths, valid.copy()


@dataclass
class SimulatedRecording:
    model: SkeletonModel
    link_lengths: np.ndarray
    keyframe_rate: float
    imu_rate: float
    noise: SensorNoiseConfig
    script: ActivityScript
    times: np.ndarray  # (K,) keyframe times
    states: list  # (K,) GaitState ground truth
    joints: np.ndarray  # (K, 7, 3) ground truth
    labels: np.ndarray  # (K,)
    contacts: np.ndarray  # (K, 2)
    keypoints: np.ndarray  # (K, 7, 2)
    kp_valid: np.ndarray  # (K, 7)
    depths: np.ndarray  # (K, 7)
    depth_valid: np.ndarray  # (K, 7)
    imu: dict  # link -> ImuStream

    @property
    def num_keyframes(self) -> int:
        return len(self.times)


def simulate_recording(script: ActivityScript, params: GaitParams,
                       noise: SensorNoiseConfig,
                       model: SkeletonModel | None = None) -> SimulatedRecording:
    """Full synchronized recording: ground truth, IMU at 120 Hz, camera at 30 Hz."""
    model = model or default_skeleton()
    truth = generate_trajectory(script, params, noise.seed, model=model)
    rng = np.random.default_rng(noise.seed)
    imu = simulate_imu(truth, noise, rng, model)
    sel = slice(None, None, KEYFRAME_STRIDE)
    kf_joints = truth.joints[sel]
    keypoints, kp_valid, depths, depth_valid = simulate_camera(kf_joints, noise, rng)
    return SimulatedRecording(
        model=model,
        link_lengths=np.asarray(params.link_lengths),
        keyframe_rate=KEYFRAME_RATE,
        imu_rate=IMU_RATE,
        noise=noise,
        script=script,
        times=truth.times[sel].copy(),
        states=truth.states[sel],
        joints=kf_joints.copy(),
        labels=truth.labels[sel].copy(),
        contacts=truth.contacts[sel].copy(),
        keypoints=keypoints,
        kp_valid=kp_valid,
        depths=depths,
        depth_valid=depth_valid,
        imu=imu,
    )


# ---------------------------------------------------------------------------
# recording file format (JSON Lines)

FORMAT_NAME = "koopgait-recording"
FORMAT_VERSION = 1


def _nan_to_none(arr):
    return [[None if not np.isfinite(v) else v for v in row] for row in np.atleast_2d(arr)]


def export_recording(rec: SimulatedRecording, path) -> None:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "skeleton": {
            "joint_names": list(rec.model.joint_names),
            "links": [list(l) for l in rec.model.links],
            "root": rec.model.root,
            "right_foot": rec.model.right_foot,
        },
        "link_lengths": rec.link_lengths.tolist(),
        "keyframe_rate": rec.keyframe_rate,
        "imu_rate": rec.imu_rate,
        "noise": asdict(rec.noise),
        "script": {
            "start": list(rec.script.start),
            "segments": [asdict(s) for s in rec.script.segments],
        },
        "num_keyframes": rec.num_keyframes,
        "imu_links": list(rec.imu.keys()),
    }
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for k in range(rec.num_keyframes):
            row = {
                "k": k,
                "t": rec.times[k],
                "label": int(rec.labels[k]),
                "contacts": [bool(c) for c in rec.contacts[k]],
                "root": rec.states[k].root.tolist(),
                "rotations": [r.reshape(-1).tolist() for r in rec.states[k].rotations],
                "joints": rec.joints[k].tolist(),
                "keypoints": _nan_to_none(rec.keypoints[k]),
                "kp_valid": [bool(v) for v in rec.kp_valid[k]],
                "depths": [None if not np.isfinite(d) else d for d in rec.depths[k]],
                "depth_valid": [bool(v) for v in rec.depth_valid[k]],
            }
            f.write(json.dumps(row) + "\n")
        for link, stream in rec.imu.items():
            block = {
                "imu_link": link,
                "times": stream.times.tolist(),
                "gyro": stream.gyro.tolist(),
                "accel": stream.accel.tolist(),
            }
            f.write(json.dumps(block) + "\n")


def import_recording(path) -> SimulatedRecording:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty recording file")

    def parse(line_no, text):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed line {line_no}: {exc}") from None

    header = parse(1, lines[0])
    if header.get("format") != FORMAT_NAME:
        raise DataError(f"{path}: not a recording file")
    if header.get("version") != FORMAT_VERSION:
        raise DataError(
            f"{path}: unsupported version {header.get('version')} "
            f"(expected {FORMAT_VERSION})"
        )
    sk = header["skeleton"]
    model = SkeletonModel(
        tuple(sk["joint_names"]),
        tuple(tuple(l) for l in sk["links"]),
        sk["root"],
        sk["right_foot"],
    )
    script = ActivityScript(
        tuple(ScriptSegment(**s) for s in header["script"]["segments"]),
        tuple(header["script"]["start"]),
    )
    noise = SensorNoiseConfig(**header["noise"])
    n_kf = int(header["num_keyframes"])
    expected_lines = 1 + n_kf + len(header["imu_links"])
    if len(lines) != expected_lines:
        raise DataError(
            f"{path}: expected {expected_lines} lines, found {len(lines)} "
            f"(file truncated at line {len(lines)})"
        )
    times = np.zeros(n_kf)
    states, labels, contacts = [], np.zeros(n_kf, dtype=int), np.zeros((n_kf, 2), dtype=bool)
    joints = np.zeros((n_kf, 7, 3))
    keypoints = np.zeros((n_kf, 7, 2))
    kp_valid = np.zeros((n_kf, 7), dtype=bool)
    depths = np.zeros((n_kf, 7))
    depth_valid = np.zeros((n_kf, 7), dtype=bool)
    for k in range(n_kf):
        row = parse(k + 2, lines[k + 1])
        for key in ("t", "label", "root", "rotations", "joints"):
            if key not in row:
                raise DataError(f"{path}: line {k + 2} missing field {key!r}")
        times[k] = row["t"]
        labels[k] = row["label"]
        contacts[k] = row["contacts"]
        states.append(GaitState(
            np.array(row["root"], dtype=float),
            np.array(row["rotations"], dtype=float).reshape(6, 3, 3),
        ))
        joints[k] = row["joints"]
        kp_valid[k] = row["kp_valid"]
        depth_valid[k] = row["depth_valid"]
        kp = np.array([[np.nan if v is None else v for v in pair]
                       for pair in row["keypoints"]], dtype=float)
        keypoints[k] = kp
        depths[k] = [np.nan if v is None else v for v in row["depths"]]
    imu = {}
    for bi, link in enumerate(header["imu_links"]):
        block = parse(1 + n_kf + bi + 1, lines[1 + n_kf + bi])
        if block.get("imu_link") != link:
            raise DataError(f"{path}: IMU block order mismatch at line {1 + n_kf + bi + 1}")
        imu[int(link)] = ImuStream(
            int(link),
            np.array(block["times"], dtype=float),
            np.array(block["gyro"], dtype=float),
            np.array(block["accel"], dtype=float),
        )
    return SimulatedRecording(
        model=model,
        link_lengths=np.array(header["link_lengths"], dtype=float),
        keyframe_rate=float(header["keyframe_rate"]),
        imu_rate=float(header["imu_rate"]),
        noise=noise,
        script=script,
        times=times,
        states=states,
        joints=joints,
        labels=labels,
        contacts=contacts,
        keypoints=keypoints,
        kp_valid=kp_valid,
        depths=depths,
        depth_valid=depth_valid,
        imu=imu,
    )


# ---------------------------------------------------------------------------
# script presets and training campaigns


def walk_script(duration: float, speed: float = 1.0, heading: float = 0.0,
                start=(0.0, 3.0)) -> ActivityScript:
    return ActivityScript((ScriptSegment("walking", duration, speed, heading),), start)


def depth_sweep_script(speed: float = 1.2, z_from: float = 3.0, z_to: float = 12.0,
                       x: float = 0.0) -> ActivityScript:
    """Straight walk away from the camera covering [z_from, z_to]."""
    duration = (z_to - z_from) / speed
    return walk_script(duration, speed, heading=0.0, start=(x, z_from))


def mixed_script(start=(0.0, 3.0), speed: float = 1.0, chair_height: float = 0.5,
                 walk_time: float = 5.0) -> ActivityScript:
    return ActivityScript(
        (
            ScriptSegment("sitting", 2.0, chair_height=chair_height),
            ScriptSegment("standing_up", 1.5, chair_height=chair_height),
            ScriptSegment("standing", 1.5),
            ScriptSegment("walking", walk_time, speed),
            ScriptSegment("standing", 1.5),
            ScriptSegment("sitting_down", 1.5, chair_height=chair_height),
            ScriptSegment("sitting", 2.0, chair_height=chair_height),
        ),
        start,
    )


def campaign_params(n_subjects: int, seed: int = 0) -> list:
    """Distinct per-subject gait parameter draws."""
    rng = np.random.default_rng(seed)
    subjects = []
    for _ in range(n_subjects):
        pelvis = float(rng.uniform(0.32, 0.4))
        thigh = float(rng.uniform(0.4, 0.5))
        shank = float(rng.uniform(0.4, 0.5))
        subjects.append(GaitParams(
            link_lengths=(pelvis, thigh, shank, pelvis, thigh, shank),
            stride_frequency=float(rng.uniform(0.85, 1.15)),
            hip_amplitude=0.6,
            knee_amplitude=float(rng.uniform(0.35, 0.55)),
            stance_duty=float(rng.uniform(0.45, 0.55)),
        ))
    return subjects


def campaign_scripts(chair_height: float = 0.5, seed: int = 0) -> list:
    """Scripted trajectories mixing the five activities."""
    del seed  # fixed script set; subjects vary through campaign_params
    scripts = [
        walk_script(10.0, 1.0),
        walk_script(8.0, 0.8, start=(0.5, 3.5)),
        mixed_script(chair_height=chair_height),
        mixed_script(speed=0.9, walk_time=4.0, chair_height=chair_height),
        ActivityScript(
            (
                ScriptSegment("standing", 2.0),
                ScriptSegment("sitting_down", 2.0, chair_height=chair_height),
                ScriptSegment("sitting", 2.5, chair_height=chair_height),
                ScriptSegment("standing_up", 2.0, chair_height=chair_height),
                ScriptSegment("standing", 2.0),
            ),
            (0.0, 4.0),
        ),
        ActivityScript(
            (
                ScriptSegment("standing", 1.5),
                ScriptSegment("walking", 6.0, 1.1),
                ScriptSegment("standing", 1.5),
            ),
            (-0.5, 3.0),
        ),
    ]
    return scripts


def training_campaign(n_subjects: int = 5, n_scripts: int | None = None,
                      noise: SensorNoiseConfig | None = None,
                      seed: int = 0) -> list:
    """Recordings for model training: every subject runs every script."""
    subjects = campaign_params(n_subjects, seed)
    recordings = []
    counter = 0
    for params in subjects:
        scripts = campaign_scripts(comfortable_chair_height(params), seed)
        if n_scripts is not None:
            scripts = scripts[:n_scripts]
        for script in scripts:
            cfg = noise or SensorNoiseConfig.zero()
            cfg = SensorNoiseConfig(cfg.keypoint_sigma, cfg.depth_sigma0,
                                    cfg.depth_kappa, cfg.gyro_sigma,
                                    cfg.accel_sigma, seed + counter)
            recordings.append(simulate_recording(script, params, cfg))
            counter += 1
    return recordings
