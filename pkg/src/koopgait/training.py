"""Dataset assembly and training entry points for the learned components.

All three models train on ground-truth joint trajectories from simulated
recordings: the contact detector on IMU features against per-foot contact
flags, the Koopman bank on adjacent-keyframe pairs labeled by the earlier
frame, and the activity classifier on normalized 13-frame windows.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .koopman import KoopmanBank, pairs_from_keyframes, train_bank
from .sensors import ContactModel, imu_feature_vector, train_contact_model
from .stgcn import (
    StgcnModel,
    TrainConfig,
    WindowDataset,
    build_partitions,
    build_windows,
    init_stgcn,
    train_stgcn,
)


def collect_contact_data(recordings):
    """IMU feature vectors and per-foot contact labels over all keyframes."""
    features, labels = [], []
    for rec in recordings:
        for k in range(rec.num_keyframes):
            features.append(imu_feature_vector(rec.imu, float(rec.times[k])))
            labels.append(rec.contacts[k])
    if not features:
        raise DataError("no keyframes in the contact training data")
    return np.stack(features), np.stack(labels)


def train_contact_detector(recordings, l2: float = 1e-4, seed: int = 0) -> ContactModel:
    features, labels = collect_contact_data(recordings)
    return train_contact_model(features, labels, l2=l2, seed=seed)


def collect_koopman_pairs(recordings):
    pairs, labels = [], []
    for rec in recordings:
        p, l = pairs_from_keyframes(rec.joints, rec.labels)
        pairs.extend(p)
        labels.extend(l)
    if not pairs:
        raise DataError("no keyframe pairs in the Koopman training data")
    return pairs, labels


def train_koopman_bank(recordings, order: int = 1, ridge: float = 1e-8,
                       rotations: int = 24, per_coordinate: bool = False) -> KoopmanBank:
    pairs, labels = collect_koopman_pairs(recordings)
    return train_bank(pairs, labels, order=order, ridge=ridge,
                      rotations=rotations, per_coordinate=per_coordinate)


def build_window_dataset(recordings, stride: int = 2, rotations: int = 8) -> WindowDataset:
    sequences = [(rec.joints, rec.labels) for rec in recordings]
    return build_windows(sequences, stride=stride, rotations=rotations)


def train_activity_classifier(recordings, stride: int = 2, rotations: int = 8,
                              config: TrainConfig | None = None,
                              channels=(3, 128, 256), seed: int = 0):
    """Train the ST-GCN on recording ground truth.

    Returns (model, epoch records, dataset sizes).
    """
    if not recordings:
        raise DataError("no recordings given")
    dataset = build_window_dataset(recordings, stride=stride, rotations=rotations)
    parts = build_partitions(recordings[0].model)
    model = init_stgcn(parts, channels=channels, seed=seed)
    config = config or TrainConfig(seed=seed)
    model, records = train_stgcn(model, dataset, config)
    return model, records, dataset
