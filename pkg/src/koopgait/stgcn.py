"""Minimal spatial-temporal graph convolutional network for per-frame
activity classification, implemented directly on numpy with hand-written
reverse-mode gradients.

Tensor layout is [B, C, N, T]: batch, channels, N=7 joints, T=13 keyframes.
Each of the two ST layers applies a three-partition spatial graph
convolution (root / centripetal / centrifugal neighbor subsets with a
learnable NxN edge mask), a depthwise temporal convolution of odd width
gamma, and a ReLU. Features are globally average-pooled over joints and
time and classified by a fully connected head into the five activities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .activity import ACTIVITY_NAMES, NUM_ACTIVITIES
from .errors import DataError
from .skeleton import RIGHT_FOOT, SkeletonModel, WORLD_UP, rotate_points

DEFAULT_ALPHA = 0.001
DEFAULT_GAMMA = 7
DEFAULT_CHANNELS = (3, 128, 256)
WINDOW_LENGTH = 13


@dataclass
class PartitionTensors:
    """Adjacency split into root/centripetal/centrifugal subsets.

    adjacency: (3, N, N) 0/1 matrices, rows index the convolution center.
    lambda_diag: (3, N) degree normalizers, row sums plus alpha.
    """

    adjacency: np.ndarray
    lambda_diag: np.ndarray
    alpha: float


def build_partitions_from_tree(links, num_nodes: int, root: int,
                               alpha: float = DEFAULT_ALPHA) -> PartitionTensors:
    hops = {root: 0}
    remaining = list(links)
    while remaining:
        progressed = False
        for i, j in list(remaining):
            if i in hops:
                hops[j] = hops[i] + 1
                remaining.remove((i, j))
                progressed = True
        if not progressed:
            raise ValueError("links do not form a tree reachable from the root")
    a = np.zeros((3, num_nodes, num_nodes))
    a[0] = np.eye(num_nodes)
    for i, j in links:
        # center j sees parent i as centripetal; center i sees child j as centrifugal
        a[1, j, i] = 1.0
        a[2, i, j] = 1.0
    lam = a.sum(axis=2) + alpha
    return PartitionTensors(a, lam, alpha)


def build_partitions(model: SkeletonModel, alpha: float = DEFAULT_ALPHA) -> PartitionTensors:
    return build_partitions_from_tree(model.links, model.num_joints, model.root, alpha)


def normalized_supports(parts: PartitionTensors, mask) -> np.ndarray:
    """(3, N, N) supports D^-1/2 (A (.) M) D^-1/2 with D from A alone."""
    d = 1.0 / np.sqrt(parts.lambda_diag)  # (3, N)
    return d[:, :, None] * (parts.adjacency * np.asarray(mask)) * d[:, None, :]


def _to_channels_last(f):
    """[B, C, N, T] -> contiguous [B, T, N, C], dtype preserved."""
    return np.ascontiguousarray(np.transpose(np.asarray(f), (0, 3, 2, 1)))


def _to_channels_first(f):
    return np.ascontiguousarray(np.transpose(f, (0, 3, 2, 1)))


def _spatial_forward_cl(x, supports, weights):
    """Channels-last spatial conv: x [B, T, N, Cin] -> [B, T, N, Cout]."""
    b, t, n, cin = x.shape
    cout = weights.shape[2]
    flat = x.reshape(-1, cin)
    out = np.zeros((b, t, n, cout))
    for j in range(3):
        y = (flat @ weights[j]).reshape(b, t, n, cout)
        out += np.matmul(supports[j], y)
    return out


def _spatial_backward_cl(grad, x, supports, weights, parts, mask):
    b, t, n, cin = x.shape
    cout = weights.shape[2]
    flat = x.reshape(-1, cin)
    d = 1.0 / np.sqrt(parts.lambda_diag)
    gx_flat = np.zeros_like(flat)
    gw = np.zeros_like(weights)
    gmask = np.zeros_like(np.asarray(mask, dtype=float))
    grad_r = grad.reshape(-1, n, cout)
    for j in range(3):
        y = (flat @ weights[j]).reshape(b, t, n, cout)
        gy = np.matmul(supports[j].T, grad)
        gy_flat = gy.reshape(-1, cout)
        gx_flat += gy_flat @ weights[j].T
        gw[j] = flat.T @ gy_flat
        # dS_j = sum over batch/time of grad_slice @ y_slice^T, batched GEMM
        gs = np.matmul(grad_r, y.reshape(-1, n, cout).swapaxes(1, 2)).sum(axis=0)
        gmask += parts.adjacency[j] * (d[j][:, None] * gs * d[j][None, :])
    return gx_flat.reshape(x.shape), gw, gmask


def spatial_conv(f, parts: PartitionTensors, weights, mask) -> np.ndarray:
    """Per-frame graph convolution, summed over the three partitions.

    f: (B, Cin, N, T); weights: (3, Cin, Cout); mask: (N, N).
    """
    f = np.asarray(f, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if weights.shape[:2] != (3, f.shape[1]):
        raise ValueError(f"weight shape {weights.shape} does not match {f.shape[1]} input channels")
    supports = normalized_supports(parts, mask)
    return _to_channels_first(_spatial_forward_cl(_to_channels_last(f), supports, weights))


def spatial_conv_reference(f, parts: PartitionTensors, weights, mask) -> np.ndarray:
    """Per-node neighbor-sum form of the same convolution (oracle).

    f_out(v_i) = sum over partitions j and neighbors v_m in subset j of
    (1/Z_im) f_in(v_m) W_j, with 1/Z_im realized as the symmetric
    normalization lambda_i^-1/2 M_im lambda_m^-1/2.
    """
    f = np.asarray(f, dtype=float)
    weights = np.asarray(weights, dtype=float)
    mask = np.asarray(mask, dtype=float)
    b, cin, n, t = f.shape
    cout = weights.shape[2]
    out = np.zeros((b, cout, n, t))
    for bi in range(b):
        for ti in range(t):
            for i in range(n):
                acc = np.zeros(cout)
                for j in range(3):
                    for m in range(n):
                        if parts.adjacency[j, i, m] == 0.0:
                            continue
                        z = np.sqrt(parts.lambda_diag[j, i]) * np.sqrt(parts.lambda_diag[j, m])
                        acc += (mask[i, m] / z) * (f[bi, :, m, ti] @ weights[j])
                out[bi, :, i, ti] = acc
    return out


def _temporal_forward_cl(x, kernel):
    """Channels-last depthwise temporal conv: x [B, T, N, C], kernel (C, gamma)."""
    gamma = kernel.shape[1]
    t = x.shape[1]
    pad = (gamma - 1) // 2
    fp = np.pad(x, ((0, 0), (pad, pad), (0, 0), (0, 0)))
    out = np.zeros_like(x)
    for tau in range(gamma):
        out += fp[:, tau : tau + t] * kernel[:, tau]
    return out


def _temporal_backward_cl(grad, x, kernel):
    gamma = kernel.shape[1]
    t = x.shape[1]
    pad = (gamma - 1) // 2
    fp = np.pad(x, ((0, 0), (pad, pad), (0, 0), (0, 0)))
    gfp = np.zeros_like(fp)
    gk = np.zeros_like(kernel)
    for tau in range(gamma):
        gfp[:, tau : tau + t] += grad * kernel[:, tau]
        gk[:, tau] = np.einsum("btnc,btnc->c", fp[:, tau : tau + t], grad, optimize=True)
    gx = gfp[:, pad : pad + t] if pad else gfp
    return gx, gk


def temporal_conv(f, kernel) -> np.ndarray:
    """Depthwise 1-D convolution over the time axis, zero padded, T preserved.

    f: (B, C, N, T); kernel: (C, gamma) with gamma odd and <= T.
    """
    f = np.asarray(f, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    gamma = kernel.shape[1]
    if gamma % 2 != 1:
        raise ValueError("temporal kernel size must be odd")
    if gamma > f.shape[3]:
        raise ValueError("temporal kernel longer than the window")
    return _to_channels_first(_temporal_forward_cl(_to_channels_last(f), kernel))


def relu(x):
    return np.maximum(x, 0.0)


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class StgcnLayer:
    weights: np.ndarray  # (3, Cin, Cout)
    mask: np.ndarray  # (N, N), initialized to ones
    tkernel: np.ndarray  # (Cout, gamma)


@dataclass
class StgcnModel:
    parts: PartitionTensors
    layers: list
    fc_weight: np.ndarray  # (C_last, 5)
    fc_bias: np.ndarray  # (5,)
    gamma: int = DEFAULT_GAMMA
    channels: tuple = DEFAULT_CHANNELS
    class_names: tuple = ACTIVITY_NAMES
    c_min: float | None = None
    c_max: float | None = None

    def parameters(self) -> list:
        params = []
        for i, layer in enumerate(self.layers):
            params.append((f"layer{i}.weights", layer.weights))
            params.append((f"layer{i}.mask", layer.mask))
            params.append((f"layer{i}.tkernel", layer.tkernel))
        params.append(("fc.weight", self.fc_weight))
        params.append(("fc.bias", self.fc_bias))
        return params


def init_stgcn(parts: PartitionTensors, channels=DEFAULT_CHANNELS,
               gamma: int = DEFAULT_GAMMA, num_classes: int = NUM_ACTIVITIES,
               seed: int = 0) -> StgcnModel:
    rng = np.random.default_rng(seed)
    n = parts.adjacency.shape[1]
    layers = []
    for cin, cout in zip(channels[:-1], channels[1:]):
        w = rng.normal(scale=np.sqrt(2.0 / (3 * cin)), size=(3, cin, cout))
        mask = np.ones((n, n))
        tkernel = np.zeros((cout, gamma))
        tkernel[:, (gamma - 1) // 2] = 1.0  # identity in time at init
        layers.append(StgcnLayer(w, mask, tkernel))
    fc_w = rng.normal(scale=0.01, size=(channels[-1], num_classes))
    fc_b = np.zeros(num_classes)
    return StgcnModel(parts, layers, fc_w, fc_b, gamma, tuple(channels))


def _forward_cache(model: StgcnModel, x):
    """Forward pass in channels-last layout, keeping backward intermediates."""
    cache = {"inputs": [], "spatial": [], "pre_relu": [], "post": []}
    h = _to_channels_last(x)  # [B, T, N, C]
    for layer in model.layers:
        cache["inputs"].append(h)
        supports = normalized_supports(model.parts, layer.mask).astype(h.dtype)
        sc = _spatial_forward_cl(h, supports, layer.weights)
        cache["spatial"].append(sc)
        tc = _temporal_forward_cl(sc, layer.tkernel)
        cache["pre_relu"].append(tc)
        h = relu(tc)
        cache["post"].append(h)
    pooled = h.mean(axis=(1, 2))
    cache["pooled"] = pooled
    logits = pooled @ model.fc_weight + model.fc_bias
    return logits, cache


def forward(model: StgcnModel, x) -> tuple:
    """Logits and softmax probabilities for a batch [B, C, N, T]."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 4 or x.shape[1] != model.channels[0]:
        raise ValueError(f"expected input [B, {model.channels[0]}, N, T], got {x.shape}")
    logits, _ = _forward_cache(model, x)
    return logits, softmax(logits)


def _backward(model: StgcnModel, cache, grad_logits):
    grads = {}
    pooled = cache["pooled"]
    grads["fc.weight"] = pooled.T @ grad_logits
    grads["fc.bias"] = grad_logits.sum(axis=0)
    gh = grad_logits @ model.fc_weight.T  # (B, C_last)
    last = cache["post"][-1]  # [B, T, N, C]
    b, t, n, c = last.shape
    g = np.broadcast_to(gh[:, None, None, :], last.shape) / (n * t)
    g = np.ascontiguousarray(g)
    for i in reversed(range(len(model.layers))):
        layer = model.layers[i]
        g = g * (cache["pre_relu"][i] > 0)
        g, gk = _temporal_backward_cl(g, cache["spatial"][i], layer.tkernel)
        supports = normalized_supports(model.parts, layer.mask).astype(g.dtype)
        g, gw, gm = _spatial_backward_cl(g, cache["inputs"][i], supports,
                                         layer.weights, model.parts, layer.mask)
        grads[f"layer{i}.tkernel"] = gk
        grads[f"layer{i}.weights"] = gw
        grads[f"layer{i}.mask"] = gm
    return grads


def weighted_cross_entropy(logits, labels, class_weights):
    """Mean class-weighted cross entropy and its logits gradient."""
    probs = softmax(logits)
    n = logits.shape[0]
    w = class_weights[labels]
    denom = float(w.sum())
    eps = 1e-12
    loss = float(-(w * np.log(probs[np.arange(n), labels] + eps)).sum() / denom)
    grad = probs * w[:, None]
    grad[np.arange(n), labels] -= w
    return loss, grad / denom


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    test_fraction: float = 0.3
    seed: int = 0


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_accuracy: float
    test_accuracy: float


@dataclass
class WindowDataset:
    """Stacked normalized windows [S, 3, 7, 13] with center-frame labels."""

    x: np.ndarray
    labels: np.ndarray
    c_min: float
    c_max: float


def stratified_split(labels, test_fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        n_test = max(1, int(round(len(idx) * test_fraction)))
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    return np.sort(np.array(train_idx)), np.sort(np.array(test_idx))


def accuracy(model: StgcnModel, x, labels, batch: int = 256) -> float:
    hits = 0
    for i in range(0, len(labels), batch):
        logits, _ = forward(model, x[i : i + batch])
        hits += int((logits.argmax(axis=1) == labels[i : i + batch]).sum())
    return hits / len(labels)


def train_stgcn(model: StgcnModel, dataset: WindowDataset,
                config: TrainConfig | None = None):
    """Mini-batch gradient descent with momentum; stratified train/test split.

    Returns (model, list of EpochRecord). Deterministic for a fixed seed.
    """
    config = config or TrainConfig()
    labels = np.asarray(dataset.labels, dtype=int)
    present = np.unique(labels)
    if len(present) != NUM_ACTIVITIES:
        missing = sorted(set(range(NUM_ACTIVITIES)) - set(present.tolist()))
        raise DataError(f"training data is missing activity classes {missing}")
    model.c_min, model.c_max = float(dataset.c_min), float(dataset.c_max)
    train_idx, test_idx = stratified_split(labels, config.test_fraction, config.seed)
    x_train, y_train = dataset.x[train_idx], labels[train_idx]
    x_test, y_test = dataset.x[test_idx], labels[test_idx]
    counts = np.bincount(y_train, minlength=NUM_ACTIVITIES).astype(float)
    class_weights = counts.sum() / (NUM_ACTIVITIES * np.maximum(counts, 1.0))
    rng = np.random.default_rng(config.seed)
    velocity = {name: np.zeros_like(p) for name, p in model.parameters()}
    params = dict(model.parameters())
    records = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(y_train))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            sel = order[start : start + config.batch_size]
            logits, cache = _forward_cache(model, x_train[sel])
            loss, grad_logits = weighted_cross_entropy(logits, y_train[sel], class_weights)
            grads = _backward(model, cache, grad_logits)
            for name, p in params.items():
                v = velocity[name]
                v *= config.momentum
                v -= config.learning_rate * grads[name]
                p += v
            epoch_loss += loss
            n_batches += 1
        records.append(EpochRecord(
            epoch,
            epoch_loss / max(n_batches, 1),
            accuracy(model, x_train, y_train),
            accuracy(model, x_test, y_test),
        ))
    return model, records


def report_to_csv(records) -> str:
    lines = ["epoch,loss,train_accuracy,test_accuracy"]
    for r in records:
        lines.append(f"{r.epoch},{r.loss!r},{r.train_accuracy!r},{r.test_accuracy!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Window construction and per-frame classification


def normalize_frame(joints, c_min: float, c_max: float) -> np.ndarray:
    joints = np.asarray(joints, dtype=float)
    return ((joints - joints[RIGHT_FOOT]) - c_min) / (c_max - c_min)


def window_indices(k: int, length: int, window: int = WINDOW_LENGTH) -> np.ndarray:
    half = (window - 1) // 2
    return np.clip(np.arange(k - half, k + half + 1), 0, length - 1)


def build_windows(sequences, stride: int = 1, rotations: int = 8,
                  vertical_axis=WORLD_UP, window: int = WINDOW_LENGTH) -> WindowDataset:
    """Rotation-augmented training windows from labeled joint sequences.

    sequences: iterable of (joints (K, 7, 3) in meters, labels (K,)).
    Each window is centered per frame on its own right foot, duplicated at
    `rotations` evenly spaced angles about the vertical axis, labeled by its
    center frame, then scaled by global bounds over the augmented set.
    """
    centered = []
    labels = []
    angles = np.arange(rotations) * (2.0 * np.pi / rotations)
    for joints_seq, labels_seq in sequences:
        joints_seq = np.asarray(joints_seq, dtype=float)
        n_frames = len(joints_seq)
        for k in range(0, n_frames, stride):
            idx = window_indices(k, n_frames, window)
            frames = joints_seq[idx] - joints_seq[idx][:, RIGHT_FOOT : RIGHT_FOOT + 1]
            for angle in angles:
                rot = frames if angle == 0.0 else np.stack(
                    [rotate_points(f, vertical_axis, angle) for f in frames]
                )
                centered.append(rot)
                labels.append(int(labels_seq[k]))
    if not centered:
        raise DataError("no training windows produced")
    stack = np.stack(centered)  # (S, T, 7, 3)
    c_min, c_max = float(stack.min()), float(stack.max())
    norm = (stack - c_min) / (c_max - c_min)
    x = np.transpose(norm, (0, 3, 2, 1))  # (S, 3, 7, T)
    return WindowDataset(x, np.array(labels, dtype=int), c_min, c_max)


def classify_window(model: StgcnModel, window_tensor) -> int:
    logits, _ = forward(model, window_tensor[None] if window_tensor.ndim == 3 else window_tensor)
    return int(logits.argmax(axis=1)[0])


def classify_frame(model: StgcnModel, joints_seq, k: int) -> int:
    """Activity of keyframe k from the surrounding 13-frame window.

    Out-of-range window positions replicate the edge frames, so any k with a
    nonempty trajectory is valid.
    """
    if model.c_min is None or model.c_max is None:
        raise DataError("model has no stored normalization bounds; train or load first")
    joints_seq = np.asarray(joints_seq, dtype=float)
    if joints_seq.ndim != 3 or len(joints_seq) == 0:
        raise ValueError("need a nonempty (K, 7, 3) trajectory")
    idx = window_indices(k, len(joints_seq))
    frames = np.stack([normalize_frame(joints_seq[i], model.c_min, model.c_max) for i in idx])
    tensor = np.transpose(frames, (2, 1, 0))  # (3, 7, T)
    return classify_window(model, tensor)


# ---------------------------------------------------------------------------
# Serialization


def save_stgcn(model: StgcnModel, path) -> None:
    payload = {
        "format": "koopgait-stgcn-model",
        "version": 1,
        "alpha": model.parts.alpha,
        "gamma": model.gamma,
        "channels": list(model.channels),
        "class_names": list(model.class_names),
        "c_min": model.c_min,
        "c_max": model.c_max,
        "adjacency": model.parts.adjacency.tolist(),
        "lambda_diag": model.parts.lambda_diag.tolist(),
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "mask": layer.mask.tolist(),
                "tkernel": layer.tkernel.tolist(),
            }
            for layer in model.layers
        ],
        "fc_weight": model.fc_weight.tolist(),
        "fc_bias": model.fc_bias.tolist(),
    }
    with open(path, "w") as f:
        json.dump(payload, f)


def load_stgcn(path) -> StgcnModel:
    with open(path) as f:
        payload = json.load(f)
    if payload.get("format") != "koopgait-stgcn-model":
        raise DataError(f"{path} is not an ST-GCN model file")
    parts = PartitionTensors(
        np.array(payload["adjacency"], dtype=float),
        np.array(payload["lambda_diag"], dtype=float),
        float(payload["alpha"]),
    )
    layers = [
        StgcnLayer(
            np.array(entry["weights"], dtype=float),
            np.array(entry["mask"], dtype=float),
            np.array(entry["tkernel"], dtype=float),
        )
        for entry in payload["layers"]
    ]
    return StgcnModel(
        parts,
        layers,
        np.array(payload["fc_weight"], dtype=float),
        np.array(payload["fc_bias"], dtype=float),
        int(payload["gamma"]),
        tuple(payload["channels"]),
        tuple(payload["class_names"]),
        payload["c_min"],
        payload["c_max"],
    )
