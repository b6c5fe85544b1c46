"""End-to-end estimation and evaluation.

estimate() runs sliding-window factor-graph optimization over a recording,
fusing whichever factor types the configuration enables. Keyframes are
initialized from the previous estimate (the first from the vision
measurements) and evicted frames keep their last in-window estimate.

evaluate() compares an estimated trajectory against the recording's ground
truth with centroid-centered per-joint Euclidean errors, the centroid depth
series, and the RMS of its second differences as the smoothness measure.

write_report() emits a deterministic CSV of per-joint errors plus
self-contained SVG plots; no plotting library is involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .activity import NUM_ACTIVITIES
from .errors import ConfigError, DataError
from .factorgraph import (
    AnchorConfig,
    KeyframeUpdate,
    SolverConfig,
    WindowGraph,
    len_key,
    root_key,
    rot_key,
    slide_window,
    solve_lm,
)
from .gaitsim import SimulatedRecording
from .koopman import KoopmanBank, KoopmanTransitionFactor
from .sensors import (
    ContactFactor,
    ContactModel,
    DepthFactor,
    DepthMeasurement,
    ImageProjectionFactor,
    ImuRotationFactor,
    IMU_LINKS,
    Keypoint2D,
    imu_feature_vector,
    lengths_from_values,
    preintegrate_rotation,
    state_from_values,
)
from .skeleton import GaitState, forward_kinematics
from .so3 import E3, rotation_aligning
from .stgcn import StgcnModel, classify_frame

FOOT_JOINTS = {0: 3, 1: 6}  # contact side -> joint index


@dataclass
class EstimatorConfig:
    window: int = 10
    use_imu: bool = True
    use_image: bool = True
    use_depth: bool = True
    use_contact: bool = True
    use_koopman: bool = True
    sigma_image: float = 0.01
    sigma_imu: float = 0.01
    sigma_contact: float = 0.005
    sigma_koopman: float = 0.05
    depth_sigma_floor: float = 0.005
    anchor_sigma_position: float = 1e-3
    anchor_sigma_rotation: float = 1e-3
    length_init: float = 0.45
    contact_threshold: float = 0.5
    z_min: float = 0.1
    solver: SolverConfig = field(default_factory=SolverConfig)
    contact_model_path: str | None = None
    koopman_bank_path: str | None = None
    stgcn_model_path: str | None = None

    def validate(self) -> None:
        if not any((self.use_imu, self.use_image, self.use_depth,
                    self.use_contact, self.use_koopman)):
            raise ConfigError("at least one factor type must be enabled")
        if self.window < 2:
            raise ConfigError("window must span at least 2 keyframes")
        for name in ("sigma_image", "sigma_imu", "sigma_contact", "sigma_koopman",
                     "depth_sigma_floor", "length_init"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @classmethod
    def vision_only(cls, **kwargs) -> "EstimatorConfig":
        return cls(use_imu=False, use_contact=False, use_koopman=False, **kwargs)

    @classmethod
    def baseline(cls, **kwargs) -> "EstimatorConfig":
        """The four-sensor graph without the prediction factor."""
        return cls(use_koopman=False, **kwargs)


@dataclass
class EstimatedTrajectory:
    times: np.ndarray
    states: list
    joints: np.ndarray  # (K, 7, 3)
    lengths: np.ndarray  # (6,)
    activities: np.ndarray  # (K,), -1 where no activity was assigned
    solver_records: list = field(default_factory=list)  # (keyframe, IterationRecord)

    @property
    def num_keyframes(self) -> int:
        return len(self.times)


def _fallback_standing_offsets(length_init: float):
    drop = np.array([0.0, 1.0, 0.0])
    side = np.array([1.0, 0.0, 0.0])
    hips = {1: 0.3 * side + 0.3 * drop, 4: -0.3 * side + 0.3 * drop}
    offsets = {0: np.zeros(3)}
    for hip, knee, foot in ((1, 2, 3), (4, 5, 6)):
        offsets[hip] = hips[hip]
        offsets[knee] = hips[hip] + length_init * drop
        offsets[foot] = hips[hip] + 2 * length_init * drop
    return offsets


def _vision_init(rec: SimulatedRecording, k: int, config: EstimatorConfig) -> GaitState:
    """First-keyframe state from back-projected keypoints and depths."""
    ok = rec.kp_valid[k] & rec.depth_valid[k]
    if ok.any():
        z_ref = float(np.median(rec.depths[k][ok]))
    else:
        z_ref = 5.0
    offsets = _fallback_standing_offsets(config.length_init)
    joints = np.zeros((7, 3))
    sternum = np.array([0.0, -1.0, z_ref])
    if ok[0]:
        u, v = rec.keypoints[k, 0]
        z = rec.depths[k, 0]
        sternum = np.array([u * z, v * z, z])
    for j in range(7):
        if ok[j]:
            u, v = rec.keypoints[k, j]
            z = rec.depths[k, j]
            joints[j] = (u * z, v * z, z)
        else:
            joints[j] = sternum + offsets[j]
    rotations = []
    for i, j in rec.model.links:
        d = joints[j] - joints[i]
        n = np.linalg.norm(d)
        rotations.append(rotation_aligning(E3, d / n) if n > 1e-9 else np.eye(3))
    return GaitState(joints[0], np.stack(rotations))


def estimate(rec: SimulatedRecording, config: EstimatorConfig,
             contact_model: ContactModel | None = None,
             bank: KoopmanBank | None = None,
             stgcn_model: StgcnModel | None = None) -> EstimatedTrajectory:
    """Sliding-window estimation over every keyframe of a recording."""
    config.validate()
    if config.use_contact and contact_model is None:
        raise ConfigError("contact factor enabled but no contact model given")
    if config.use_koopman and (bank is None or stgcn_model is None):
        raise ConfigError("prediction factor enabled but bank or classifier missing")
    model = rec.model
    n_links = len(model.links)
    n_kf = rec.num_keyframes
    lengths0 = np.full(n_links, config.length_init)
    if n_kf == 0:
        return EstimatedTrajectory(np.zeros(0), [], np.zeros((0, 7, 3)),
                                   lengths0, np.zeros(0, dtype=int))
    contact_probs = None
    if config.use_contact:
        contact_probs = np.zeros((n_kf, 2))
        for k in range(n_kf):
            feats = imu_feature_vector(rec.imu, float(rec.times[k]))
            contact_probs[k] = contact_model.probabilities(feats)
    graph = WindowGraph(config.window)
    values: dict = {}
    for li in range(n_links):
        graph.add_variable(len_key(li))
        values[len_key(li)] = float(config.length_init)
    anchors = AnchorConfig(config.anchor_sigma_position, config.anchor_sigma_rotation)
    est_states: list = [None] * n_kf
    est_joints = np.zeros((n_kf, 7, 3))
    activities = np.full(n_kf, -1, dtype=int)
    solver_records: list = []
    for k in range(n_kf):
        if k == 0:
            init = _vision_init(rec, 0, config)
        else:
            prev = est_states[k - 1]
            init = GaitState(prev.root.copy(), prev.rotations.copy())
        variables = {root_key(k): init.root}
        for li in range(n_links):
            variables[rot_key(k, li)] = init.rotations[li]
        factors = []
        if config.use_image:
            for j in range(7):
                if rec.kp_valid[k, j]:
                    u, v = rec.keypoints[k, j]
                    kp = Keypoint2D(float(u), float(v), j, k)
                    factors.append(ImageProjectionFactor(k, j, kp, model,
                                                         config.sigma_image, config.z_min))
        if config.use_depth:
            for j in range(7):
                if rec.depth_valid[k, j]:
                    z = float(rec.depths[k, j])
                    sigma = max(rec.noise.depth_sigma(z), config.depth_sigma_floor)
                    meas = DepthMeasurement(z, j, k)
                    factors.append(DepthFactor(k, j, meas, model, sigma))
        if k > 0:
            t0, t1 = float(rec.times[k - 1]), float(rec.times[k])
            if config.use_imu:
                for link in IMU_LINKS:
                    if link not in rec.imu:
                        continue
                    meas = preintegrate_rotation(rec.imu[link], t0, t1)
                    if not meas.empty:
                        factors.append(ImuRotationFactor(k - 1, k, link, meas,
                                                         config.sigma_imu))
            if config.use_contact:
                for side, joint in FOOT_JOINTS.items():
                    if (contact_probs[k - 1, side] > config.contact_threshold
                            and contact_probs[k, side] > config.contact_threshold):
                        factors.append(ContactFactor(k - 1, k, joint, model,
                                                     config.sigma_contact))
            if config.use_koopman:
                label = classify_frame(stgcn_model, est_joints[:k], k - 1)
                activities[k - 1] = label
                if label in bank.trained_activities():
                    factors.append(KoopmanTransitionFactor(k - 1, k, model, bank,
                                                           label, config.sigma_koopman))
        slide_window(graph, values, KeyframeUpdate(k, variables, factors), anchors)
        result = solve_lm(graph, values, config.solver)
        values = result.values
        solver_records.extend((k, r) for r in result.iterations)
        lengths_now = lengths_from_values(values, model)
        for f in graph.frames():
            st = state_from_values(values, f, model)
            est_states[f] = st
            est_joints[f] = forward_kinematics(st, lengths_now, model)
    lengths = lengths_from_values(values, model)
    return EstimatedTrajectory(rec.times.copy(), est_states, est_joints,
                               lengths, activities, solver_records)


def solver_records_to_csv(records) -> str:
    lines = ["keyframe,iteration,cost,damping,step_norm,accepted,predicted_decrease"]
    for k, r in records:
        lines.append(
            f"{k},{r.iteration},{r.cost!r},{r.damping!r},{r.step_norm!r},"
            f"{int(r.accepted)},{r.predicted_decrease!r}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# trajectory files


TRAJ_FORMAT = "koopgait-trajectory"


def save_trajectory(est: EstimatedTrajectory, path) -> None:
    header = {
        "format": TRAJ_FORMAT,
        "version": 1,
        "num_keyframes": est.num_keyframes,
        "lengths": est.lengths.tolist(),
    }
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
        for k in range(est.num_keyframes):
            row = {
                "k": k,
                "t": float(est.times[k]),
                "root": est.states[k].root.tolist(),
                "rotations": [r.reshape(-1).tolist() for r in est.states[k].rotations],
                "joints": est.joints[k].tolist(),
                "activity": int(est.activities[k]),
            }
            f.write(json.dumps(row) + "\n")


def load_trajectory(path) -> EstimatedTrajectory:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty trajectory file")
    header = json.loads(lines[0])
    if header.get("format") != TRAJ_FORMAT:
        raise DataError(f"{path}: not a trajectory file")
    n = int(header["num_keyframes"])
    if len(lines) != n + 1:
        raise DataError(f"{path}: expected {n + 1} lines, found {len(lines)}")
    times = np.zeros(n)
    states, joints = [], np.zeros((n, 7, 3))
    activities = np.full(n, -1, dtype=int)
    for k in range(n):
        row = json.loads(lines[k + 1])
        times[k] = row["t"]
        states.append(GaitState(np.array(row["root"]),
                                np.array(row["rotations"]).reshape(6, 3, 3)))
        joints[k] = row["joints"]
        activities[k] = row["activity"]
    return EstimatedTrajectory(times, states, joints,
                               np.array(header["lengths"], dtype=float), activities)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvaluationReport:
    errors: np.ndarray  # (K, 7) centroid-centered per-joint errors, meters
    percentiles: dict  # p50 / p90 / p95 / max
    centroid_depth_est: np.ndarray  # (K,)
    centroid_depth_gt: np.ndarray  # (K,)
    smoothness_est: float  # RMS of second differences of centroid depth
    smoothness_gt: float
    max_centroid_jump: float  # largest inter-keyframe centroid motion, meters
    confusion: np.ndarray  # (5, 5) rows: true activity, cols: predicted
    activity_accuracy: float | None

    def to_dict(self) -> dict:
        return {
            "percentiles": self.percentiles,
            "smoothness_est": self.smoothness_est,
            "smoothness_gt": self.smoothness_gt,
            "max_centroid_jump": self.max_centroid_jump,
            "confusion": self.confusion.tolist(),
            "activity_accuracy": self.activity_accuracy,
            "errors": self.errors.tolist(),
            "centroid_depth_est": self.centroid_depth_est.tolist(),
            "centroid_depth_gt": self.centroid_depth_gt.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EvaluationReport":
        return cls(
            np.array(payload["errors"], dtype=float),
            payload["percentiles"],
            np.array(payload["centroid_depth_est"], dtype=float),
            np.array(payload["centroid_depth_gt"], dtype=float),
            float(payload["smoothness_est"]),
            float(payload["smoothness_gt"]),
            float(payload["max_centroid_jump"]),
            np.array(payload["confusion"], dtype=float),
            payload["activity_accuracy"],
        )


def second_difference_rms(series) -> float:
    series = np.asarray(series, dtype=float)
    if len(series) < 3:
        return 0.0
    dd = series[2:] - 2.0 * series[1:-1] + series[:-2]
    return float(np.sqrt(np.mean(dd * dd)))


def evaluate(est: EstimatedTrajectory, rec: SimulatedRecording) -> EvaluationReport:
    if est.num_keyframes != rec.num_keyframes:
        raise DataError(
            f"keyframe count mismatch: estimate {est.num_keyframes}, "
            f"recording {rec.num_keyframes}"
        )
    k = est.num_keyframes
    est_centroids = est.joints.mean(axis=1)
    gt_centroids = rec.joints.mean(axis=1)
    est_centered = est.joints - est_centroids[:, None, :]
    gt_centered = rec.joints - gt_centroids[:, None, :]
    errors = np.linalg.norm(est_centered - gt_centered, axis=2)
    flat = errors.reshape(-1)
    percentiles = {
        "p50": float(np.percentile(flat, 50)) if flat.size else 0.0,
        "p90": float(np.percentile(flat, 90)) if flat.size else 0.0,
        "p95": float(np.percentile(flat, 95)) if flat.size else 0.0,
        "max": float(flat.max()) if flat.size else 0.0,
    }
    depth_est = est_centroids[:, 2]
    depth_gt = gt_centroids[:, 2]
    jumps = np.linalg.norm(np.diff(est_centroids, axis=0), axis=1) if k > 1 else np.zeros(0)
    confusion = np.zeros((NUM_ACTIVITIES, NUM_ACTIVITIES))
    assigned = est.activities >= 0
    accuracy = None
    if assigned.any():
        for truth, pred in zip(rec.labels[assigned], est.activities[assigned]):
            confusion[int(truth), int(pred)] += 1
        accuracy = float(np.trace(confusion) / confusion.sum())
    return EvaluationReport(
        errors,
        percentiles,
        depth_est,
        depth_gt,
        second_difference_rms(depth_est),
        second_difference_rms(depth_gt),
        float(jumps.max()) if jumps.size else 0.0,
        confusion,
        accuracy,
    )


def save_report(report: EvaluationReport, path) -> None:
    with open(path, "w") as f:
        json.dump({"format": "koopgait-report", "version": 1, **report.to_dict()}, f)


def load_report(path) -> EvaluationReport:
    with open(path) as f:
        payload = json.load(f)
    if payload.get("format") != "koopgait-report":
        raise DataError(f"{path} is not an evaluation report")
    return EvaluationReport.from_dict(payload)


# ---------------------------------------------------------------------------
# report rendering (CSV + dependency-free SVG)

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _svg_open(width, height):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def svg_boxplot(series: dict, path, title: str, ylabel: str) -> None:
    """Median/quartile/whisker boxes, one per named series."""
    width, height = 640, 400
    left, right, top, bottom = 70, 20, 40, 60
    plot_w, plot_h = width - left - right, height - top - bottom
    stats = {}
    hi = 0.0
    for name, vals in series.items():
        vals = np.asarray(vals, dtype=float)
        q = np.percentile(vals, [5, 25, 50, 75, 95]) if vals.size else np.zeros(5)
        stats[name] = q
        hi = max(hi, float(q[4]))
    hi = hi * 1.1 if hi > 0 else 1.0

    def ypix(v):
        return top + plot_h * (1.0 - v / hi)

    parts = _svg_open(width, height)
    parts.append(f'<text x="{width / 2}" y="24" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="15">{title}</text>')
    parts.append(f'<text x="16" y="{top + plot_h / 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {top + plot_h / 2})">{ylabel}</text>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" '
                 f'stroke="black"/>')
    parts.append(f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" '
                 f'y2="{top + plot_h}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = hi * frac
        y = ypix(v)
        parts.append(f'<line x1="{left - 4}" y1="{_fmt(y)}" x2="{left}" y2="{_fmt(y)}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{_fmt(v)}</text>')
    n = len(stats)
    slot = plot_w / max(n, 1)
    box_w = min(70.0, slot * 0.5)
    for i, (name, q) in enumerate(stats.items()):
        cx = left + slot * (i + 0.5)
        color = _PALETTE[i % len(_PALETTE)]
        lo5, q1, med, q3, hi95 = q
        parts.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(ypix(lo5))}" x2="{_fmt(cx)}" '
                     f'y2="{_fmt(ypix(q1))}" stroke="{color}"/>')
        parts.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(ypix(q3))}" x2="{_fmt(cx)}" '
                     f'y2="{_fmt(ypix(hi95))}" stroke="{color}"/>')
        parts.append(f'<rect x="{_fmt(cx - box_w / 2)}" y="{_fmt(ypix(q3))}" '
                     f'width="{_fmt(box_w)}" height="{_fmt(ypix(q1) - ypix(q3))}" '
                     f'fill="{color}" fill-opacity="0.25" stroke="{color}"/>')
        parts.append(f'<line x1="{_fmt(cx - box_w / 2)}" y1="{_fmt(ypix(med))}" '
                     f'x2="{_fmt(cx + box_w / 2)}" y2="{_fmt(ypix(med))}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_fmt(cx)}" y="{height - 28}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def svg_lines(series: dict, path, title: str, xlabel: str, ylabel: str) -> None:
    """Polyline chart; series maps name -> (x, y) arrays."""
    width, height = 640, 400
    left, right, top, bottom = 70, 20, 40, 60
    plot_w, plot_h = width - left - right, height - top - bottom
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def pix(x, y):
        px = left + plot_w * (x - x_lo) / (x_hi - x_lo)
        py = top + plot_h * (1.0 - (y - y_lo) / (y_hi - y_lo))
        return px, py

    parts = _svg_open(width, height)
    parts.append(f'<text x="{width / 2}" y="24" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="15">{title}</text>')
    parts.append(f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{top + plot_h / 2}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {top + plot_h / 2})">{ylabel}</text>')
    parts.append(f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
                 f'fill="none" stroke="black"/>')
    for frac in (0.0, 0.5, 1.0):
        vx = x_lo + (x_hi - x_lo) * frac
        vy = y_lo + (y_hi - y_lo) * frac
        px, _ = pix(vx, y_lo)
        _, py = pix(x_lo, vy)
        parts.append(f'<text x="{_fmt(px)}" y="{top + plot_h + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{_fmt(vx)}</text>')
        parts.append(f'<text x="{left - 8}" y="{_fmt(py + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{_fmt(vy)}</text>')
    for i, (name, (x, y)) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(
            f"{_fmt(px)},{_fmt(py)}" for px, py in (pix(xi, yi) for xi, yi in zip(x, y))
        )
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{left + 8}" y="{top + 16 + 16 * i}" '
                     f'font-family="sans-serif" font-size="12" fill="{color}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def write_report(reports: dict, out_dir) -> list:
    """Render evaluation reports into errors.csv, two SVG plots and summary.json.

    reports: ordered mapping of configuration name -> EvaluationReport.
    Returns the list of written file paths.
    """
    import os

    if not reports:
        raise DataError("no evaluation reports given")
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "errors.csv")
    with open(csv_path, "w") as f:
        f.write("report,keyframe,joint,error_m\n")
        for name, rep in reports.items():
            k, nj = rep.errors.shape
            for ki in range(k):
                for j in range(nj):
                    f.write(f"{name},{ki},{j},{rep.errors[ki, j]!r}\n")
    box_path = os.path.join(out_dir, "boxplot.svg")
    svg_boxplot({name: rep.errors.reshape(-1) for name, rep in reports.items()},
                box_path, "Centroid-centered joint errors", "error [m]")
    depth_path = os.path.join(out_dir, "depth_traj.svg")
    first = next(iter(reports.values()))
    series = {"ground truth": (np.arange(len(first.centroid_depth_gt)),
                               first.centroid_depth_gt)}
    for name, rep in reports.items():
        series[name] = (np.arange(len(rep.centroid_depth_est)), rep.centroid_depth_est)
    svg_lines(series, depth_path, "Skeleton centroid depth", "keyframe", "depth [m]")
    summary_path = os.path.join(out_dir, "summary.json")
    summary = {
        name: {
            "percentiles": rep.percentiles,
            "smoothness_est": rep.smoothness_est,
            "smoothness_gt": rep.smoothness_gt,
            "max_centroid_jump": rep.max_centroid_jump,
            "activity_accuracy": rep.activity_accuracy,
            "confusion": rep.confusion.tolist(),
        }
        for name, rep in reports.items()
    }
    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
    return [csv_path, box_path, depth_path, summary_path]
