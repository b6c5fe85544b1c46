import numpy as np
import pytest

from koopgait.errors import DataError
from koopgait.stgcn import (
    PartitionTensors,
    TrainConfig,
    WindowDataset,
    _backward,
    _forward_cache,
    accuracy,
    build_partitions,
    build_partitions_from_tree,
    classify_frame,
    forward,
    init_stgcn,
    load_stgcn,
    normalized_supports,
    report_to_csv,
    save_stgcn,
    softmax,
    spatial_conv,
    spatial_conv_reference,
    stratified_split,
    temporal_conv,
    train_stgcn,
    weighted_cross_entropy,
    window_indices,
)


def random_tree(rng, n):
    links = []
    for child in range(1, n):
        parent = int(rng.integers(0, child))
        links.append((parent, child))
    return tuple(links)


# --- partitions ---------------------------------------------------------------


def test_partitions_right_knee(skel):
    parts = build_partitions(skel)
    a = parts.adjacency
    assert a[0, 2, 2] == 1.0  # itself: root subset
    assert a[1, 2, 1] == 1.0  # right hip is centripetal for the knee
    assert a[2, 2, 3] == 1.0  # right foot is centrifugal
    assert a[1, 2].sum() == 1.0 and a[2, 2].sum() == 1.0


def test_sternum_has_no_centripetal(skel):
    parts = build_partitions(skel)
    assert parts.adjacency[1, 0].sum() == 0.0


def test_lambda_counts_two_children(skel):
    parts = build_partitions(skel)
    # sternum has both hips in its centrifugal subset
    assert parts.lambda_diag[2, 0] == pytest.approx(2.001)
    assert parts.alpha == 0.001


def test_partition_union_covers_once(skel):
    parts = build_partitions(skel)
    total = parts.adjacency.sum(axis=0)
    expected = np.eye(7)
    for i, j in skel.links:
        expected[i, j] = 1.0
        expected[j, i] = 1.0
    assert np.array_equal(total, expected)


# --- spatial convolution --------------------------------------------------------


def _self_loop_parts(n, alpha=0.001):
    a = np.zeros((3, n, n))
    a[0] = np.eye(n)
    lam = a.sum(axis=2) + alpha
    return PartitionTensors(a, lam, alpha)


def test_spatial_conv_self_loop_passthrough(rng):
    n, c = 4, 3
    parts = _self_loop_parts(n)
    f = rng.normal(size=(2, c, n, 5))
    w = np.stack([np.eye(c)] * 3)
    out = spatial_conv(f, parts, w, np.ones((n, n)))
    assert np.allclose(out, f / 1.001, atol=1e-12)


def test_spatial_conv_zero_mask(skel, rng):
    parts = build_partitions(skel)
    f = rng.normal(size=(2, 3, 7, 5))
    w = rng.normal(size=(3, 3, 4))
    out = spatial_conv(f, parts, w, np.zeros((7, 7)))
    assert np.allclose(out, 0.0)


def test_spatial_conv_matches_reference_on_random_graphs():
    rng = np.random.default_rng(99)
    for _ in range(100):
        n = int(rng.integers(3, 8))
        links = random_tree(rng, n)
        parts = build_partitions_from_tree(links, n, 0)
        cin, cout = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        f = rng.normal(size=(2, cin, n, 3))
        w = rng.normal(size=(3, cin, cout))
        mask = rng.normal(size=(n, n))
        fast = spatial_conv(f, parts, w, mask)
        slow = spatial_conv_reference(f, parts, w, mask)
        assert np.max(np.abs(fast - slow)) < 1e-10


def test_reference_single_node_graph(rng):
    parts = build_partitions_from_tree((), 1, 0)
    f = rng.normal(size=(1, 2, 1, 3))
    w = rng.normal(size=(3, 2, 2))
    out = spatial_conv_reference(f, parts, w, np.ones((1, 1)))
    # only the root subset contributes, with symmetric normalization 1/(1+alpha)
    expected = np.einsum("bcnt,cd->bdnt", f, w[0]) / 1.001
    assert np.allclose(out, expected, atol=1e-12)


def test_reference_two_node_path_hand_expansion(rng):
    parts = build_partitions_from_tree(((0, 1),), 2, 0)
    f = rng.normal(size=(1, 1, 2, 1))
    w = rng.normal(size=(3, 1, 1))
    mask = np.ones((2, 2))
    out = spatial_conv(f, parts, w, mask)
    a = 1.001
    # the far endpoint of a one-way edge has row sum 0, so its normalizer is
    # alpha alone: the off-diagonal weight is 1/sqrt((1+alpha) * alpha)
    cross = 1.0 / np.sqrt(a * 0.001)
    v0 = f[0, 0, 0, 0] * w[0, 0, 0] / a + f[0, 0, 1, 0] * w[2, 0, 0] * cross
    v1 = f[0, 0, 1, 0] * w[0, 0, 0] / a + f[0, 0, 0, 0] * w[1, 0, 0] * cross
    assert out[0, 0, 0, 0] == pytest.approx(v0)
    assert out[0, 0, 1, 0] == pytest.approx(v1)


# --- temporal convolution -------------------------------------------------------


def test_temporal_delta_kernel_identity(rng):
    f = rng.normal(size=(2, 3, 4, 9))
    kernel = np.zeros((3, 5))
    kernel[:, 2] = 1.0
    assert np.allclose(temporal_conv(f, kernel), f)


def test_temporal_constant_input_interior_scaling(rng):
    f = np.ones((1, 2, 1, 11))
    kernel = rng.normal(size=(2, 3))
    out = temporal_conv(f, kernel)
    s = kernel.sum(axis=1)
    assert np.allclose(out[0, :, 0, 1:-1], s[:, None])
    assert not np.allclose(out[0, :, 0, 0], s)  # boundary attenuated by padding


def test_temporal_matches_sliding_window_oracle(rng):
    f = rng.normal(size=(2, 3, 4, 13))
    kernel = rng.normal(size=(3, 7))
    out = temporal_conv(f, kernel)
    t = f.shape[3]
    pad = 3
    for b in range(2):
        for c in range(3):
            for n in range(4):
                sig = np.concatenate([np.zeros(pad), f[b, c, n], np.zeros(pad)])
                for ti in range(t):
                    ref = float(sig[ti : ti + 7] @ kernel[c])
                    assert abs(out[b, c, n, ti] - ref) < 1e-12


def test_temporal_commutes_with_node_permutation(rng):
    f = rng.normal(size=(2, 3, 5, 9))
    kernel = rng.normal(size=(3, 5))
    perm = rng.permutation(5)
    a = temporal_conv(f, kernel)[:, :, perm]
    b = temporal_conv(f[:, :, perm], kernel)
    assert np.max(np.abs(a - b)) < 1e-12


# --- forward / training ----------------------------------------------------------


def small_model(seed=0, channels=(2, 3), n=3, gamma=3):
    links = tuple((i, i + 1) for i in range(n - 1))
    parts = build_partitions_from_tree(links, n, 0)
    return init_stgcn(parts, channels=channels, gamma=gamma, seed=seed)


def test_zero_fc_uniform_probabilities(skel, rng):
    parts = build_partitions(skel)
    model = init_stgcn(parts, channels=(3, 8, 8), seed=1)
    model.fc_weight[:] = 0.0
    model.fc_bias[:] = 0.0
    _, probs = forward(model, rng.normal(size=(2, 3, 7, 13)))
    assert np.allclose(probs, 0.2)


def test_softmax_sums_to_one_sweep():
    rng = np.random.default_rng(21)
    for _ in range(1000):
        model = small_model(seed=int(rng.integers(1 << 30)))
        x = rng.normal(scale=rng.uniform(0.1, 10.0), size=(1, 2, 3, 5))
        _, probs = forward(model, x)
        assert abs(probs.sum() - 1.0) < 1e-12
        assert np.all(probs > 0)


def test_gradients_match_fd():
    rng = np.random.default_rng(5)
    model = small_model(seed=3, channels=(2, 3, 4), n=3, gamma=3)
    x = rng.normal(size=(2, 2, 3, 5))
    labels = np.array([1, 3])
    weights = np.ones(5)

    def loss_fn():
        logits, _ = _forward_cache(model, x)
        return weighted_cross_entropy(logits, labels, weights)[0]

    logits, cache = _forward_cache(model, x)
    _, grad_logits = weighted_cross_entropy(logits, labels, weights)
    grads = _backward(model, cache, grad_logits)
    h = 1e-5
    for name, param in model.parameters():
        g = grads[name]
        flat = param.reshape(-1)
        for idx in range(flat.size):
            old = flat[idx]
            flat[idx] = old + h
            lp = loss_fn()
            flat[idx] = old - h
            lm = loss_fn()
            flat[idx] = old
            fd = (lp - lm) / (2 * h)
            scale = max(1.0, abs(g.reshape(-1)[idx]))
            assert abs(fd - g.reshape(-1)[idx]) / scale < 1e-4, name


def test_single_sample_memorization():
    rng = np.random.default_rng(8)
    model = small_model(seed=2, channels=(2, 4), n=3, gamma=3)
    x = rng.normal(size=(1, 2, 3, 5))
    # plain descent on one example drives the loss to zero
    weights = np.ones(5)
    labels = np.array([4])
    for _ in range(300):
        logits, cache = _forward_cache(model, x)
        loss, grad_logits = weighted_cross_entropy(logits, labels, weights)
        grads = _backward(model, cache, grad_logits)
        for name, p in model.parameters():
            p -= 0.5 * grads[name]
    assert loss < 1e-2


def test_train_rejects_missing_class(rng):
    model = small_model(channels=(3, 4), n=7)
    x = rng.normal(size=(20, 3, 7, 13))
    labels = np.zeros(20, dtype=int)  # only one class present
    with pytest.raises(DataError, match="missing activity classes"):
        train_stgcn(model, WindowDataset(x, labels, 0.0, 1.0), TrainConfig(epochs=1))


def test_stratified_split_counts():
    labels = np.array([0] * 50 + [1] * 20 + [2] * 10)
    train_idx, test_idx = stratified_split(labels, 0.3, seed=0)
    assert len(set(train_idx) & set(test_idx)) == 0
    assert len(train_idx) + len(test_idx) == 80
    for cls, total in ((0, 50), (1, 20), (2, 10)):
        n_test = int((labels[test_idx] == cls).sum())
        assert n_test == round(total * 0.3)


def test_train_determinism_and_report(skel, rng):
    parts = build_partitions(skel)
    x = rng.normal(size=(50, 3, 7, 13))
    labels = np.arange(50) % 5
    results = []
    for _ in range(2):
        model = init_stgcn(parts, channels=(3, 4, 4), seed=7)
        model, records = train_stgcn(
            model, WindowDataset(x.copy(), labels.copy(), 0.0, 1.0),
            TrainConfig(epochs=2, batch_size=16, seed=11),
        )
        results.append((model.fc_weight.copy(), records[-1].loss))
    assert np.array_equal(results[0][0], results[1][0])
    assert results[0][1] == results[1][1]
    csv = report_to_csv(records)
    assert csv.splitlines()[0] == "epoch,loss,train_accuracy,test_accuracy"


def test_classify_frame_replication_padding(skel, rng):
    parts = build_partitions(skel)
    model = init_stgcn(parts, channels=(3, 4, 4), seed=0)
    model.c_min, model.c_max = -1.0, 1.0
    traj = rng.normal(size=(1, 7, 3))
    label = classify_frame(model, traj, 0)
    assert 0 <= label < 5
    idx = window_indices(0, 1)
    assert np.all(idx == 0) and len(idx) == 13


def test_model_round_trip_bit_exact(tmp_path, skel):
    parts = build_partitions(skel)
    model = init_stgcn(parts, channels=(3, 6, 7), seed=9)
    model.c_min, model.c_max = -1.25, 2.5
    path = tmp_path / "stgcn.json"
    save_stgcn(model, path)
    loaded = load_stgcn(path)
    assert loaded.channels == model.channels
    assert loaded.gamma == model.gamma
    assert loaded.c_min == model.c_min and loaded.c_max == model.c_max
    for (na, pa), (nb, pb) in zip(model.parameters(), loaded.parameters()):
        assert na == nb
        assert np.array_equal(pa, pb)
    assert np.array_equal(loaded.parts.adjacency, model.parts.adjacency)


def test_accuracy_helper(skel, rng):
    parts = build_partitions(skel)
    model = init_stgcn(parts, channels=(3, 4, 4), seed=0)
    x = rng.normal(size=(10, 3, 7, 13))
    logits, _ = forward(model, x)
    labels = logits.argmax(axis=1)
    assert accuracy(model, x, labels) == 1.0
