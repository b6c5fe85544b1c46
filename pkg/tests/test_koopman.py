import numpy as np
import pytest

from koopgait.activity import WALKING
from koopgait.errors import DataError
from koopgait.factorgraph import len_key, root_key, rot_key
from koopgait.koopman import (
    FourierBasis,
    KoopmanBank,
    KoopmanTransitionFactor,
    enumerate_basis,
    eval_observables,
    eval_observables_batch,
    koopman_residual,
    load_bank,
    observables_jacobian,
    predict_next,
    save_bank,
    train_bank,
    train_edmd,
)
from koopgait.skeleton import (
    NormalizationParams,
    RIGHT_FOOT,
    forward_kinematics,
)

from conftest import factor_fd_check, random_lengths, random_state


def test_enumerate_basis_d2_n1():
    basis = enumerate_basis(2, 1)
    assert basis.coeffs.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_enumerate_basis_d7_n1_sizes():
    basis = enumerate_basis(7, 1)
    assert basis.num_fourier == 128
    assert basis.lifted_dim == 135


def test_enumerate_basis_d1_n3():
    basis = enumerate_basis(1, 3)
    assert basis.coeffs.reshape(-1).tolist() == [0, 1, 2, 3]


def test_enumerate_basis_overflow_guard():
    with pytest.raises(ValueError, match="limit"):
        enumerate_basis(21, 2)


def test_observables_at_zero():
    basis = enumerate_basis(7, 1)
    psi = eval_observables(np.zeros(7), basis)
    assert np.allclose(psi[:7], 0.0)
    assert np.allclose(psi[7:], 1.0)


def test_constant_function_entry():
    basis = enumerate_basis(3, 2)
    rng = np.random.default_rng(0)
    zero_idx = 3  # first Fourier entry is the all-zero coefficient vector
    for _ in range(20):
        psi = eval_observables(rng.normal(size=3), basis)
        assert psi[zero_idx] == pytest.approx(1.0)


def test_fourier_entries_bounded(rng):
    basis = enumerate_basis(7, 1)
    x = rng.uniform(-3, 3, size=(10_000, 7))
    psi = eval_observables_batch(x, basis)
    fourier = psi[7:]
    assert fourier.min() >= -1.0 - 1e-12 and fourier.max() <= 1.0 + 1e-12


def test_observables_jacobian_fd(rng):
    basis = enumerate_basis(7, 1)
    h = 1e-6
    for _ in range(20):
        x = rng.uniform(0, 1, size=7)
        jac = observables_jacobian(x, basis)
        fd = np.zeros_like(jac)
        for c in range(7):
            d = np.zeros(7)
            d[c] = h
            fd[:, c] = (eval_observables(x + d, basis) - eval_observables(x - d, basis)) / (2 * h)
        assert np.max(np.abs(jac - fd)) < 1e-6


def test_edmd_scalar_linear_system():
    # x_{k+1} = 0.9 x_k; order-0 basis = identity + constant
    basis = enumerate_basis(1, 0)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(200, 1))
    y = 0.9 * x
    k = train_edmd(x, y, basis, ridge=1e-10)
    assert abs(k[0, 0] - 0.9) < 1e-8
    assert abs(k[0, 1]) < 1e-8


def test_edmd_matches_closed_form_least_squares(rng):
    # linear system inside the observable span, against the lstsq oracle
    basis = enumerate_basis(2, 1)
    a = np.array([[0.9, -0.1], [0.0, 0.8]])
    x = rng.normal(scale=0.3, size=(500, 2))
    y = x @ a.T
    k = train_edmd(x, y, basis, ridge=1e-12)
    psi_x = eval_observables_batch(x, basis)
    psi_y = eval_observables_batch(y, basis)
    k_ref = np.linalg.lstsq(psi_x.T, psi_y.T, rcond=None)[0].T
    pred = k[:2] @ psi_x
    pred_ref = k_ref[:2] @ psi_x
    assert np.max(np.abs(pred - pred_ref)) < 1e-8
    assert np.max(np.abs(pred - y.T)) < 1e-8


def test_edmd_fixed_point_data(rng):
    basis = enumerate_basis(2, 1)
    x = rng.uniform(0, 1, size=(300, 2))
    k = train_edmd(x, x, basis, ridge=1e-10)
    psi = eval_observables_batch(x, basis)
    assert np.max(np.abs(k @ psi - psi)) < 1e-6


def test_edmd_singular_gram_message():
    basis = enumerate_basis(2, 1)
    x = np.zeros((10, 2))  # rank-deficient lifting
    with pytest.raises(np.linalg.LinAlgError, match="ridge"):
        train_edmd(x, x, basis, ridge=0.0)


def test_edmd_residual_monotone_in_basis_order(rng):
    # nested least squares: richer basis cannot fit the states worse
    x = rng.uniform(0.1, 0.9, size=(300, 1))
    y = np.sin(2.0 * x) * 0.4 + 0.1
    losses = []
    for order in (0, 1, 2, 3):
        basis = enumerate_basis(1, order)
        k = train_edmd(x, y, basis, ridge=1e-12)
        pred = (k[:1] @ eval_observables_batch(x, basis)).T
        losses.append(float(np.sum((pred - y) ** 2)))
    assert all(b <= a + 1e-10 for a, b in zip(losses, losses[1:]))


def test_predict_fixed_point(skel, rng):
    pairs, labels = [], []
    for _ in range(400):
        joints = forward_kinematics(random_state(rng), random_lengths(rng), skel)
        pairs.append((joints, joints))
        labels.append(WALKING)
    bank = train_bank(pairs, labels, order=1, ridge=1e-10, rotations=4)
    for jk, _ in pairs[:20]:
        pred = predict_next(jk, bank, WALKING)
        assert np.max(np.abs(pred - jk)) < 1e-6


def test_predict_translation_equivariance(skel, rng):
    pairs, labels = [], []
    for _ in range(300):
        joints = forward_kinematics(random_state(rng), random_lengths(rng), skel)
        drift = rng.normal(scale=0.02, size=(7, 3))
        pairs.append((joints, joints + drift))
        labels.append(WALKING)
    bank = train_bank(pairs, labels, order=1, ridge=1e-8, rotations=4)
    joints = forward_kinematics(random_state(rng), random_lengths(rng), skel)
    t = np.array([3.0, -1.0, 7.0])
    a = predict_next(joints + t, bank, WALKING)
    b = predict_next(joints, bank, WALKING) + t
    assert np.max(np.abs(a - b)) < 1e-9


def test_untrained_activity_rejected(skel, rng):
    joints = forward_kinematics(random_state(rng), random_lengths(rng), skel)
    bank = train_bank([(joints, joints)] * 40, [WALKING] * 40, rotations=2)
    with pytest.raises(DataError):
        predict_next(joints, bank, 2)


def test_bank_round_trip_bit_exact(tmp_path, skel, rng):
    pairs = []
    for _ in range(60):
        joints = forward_kinematics(random_state(rng), random_lengths(rng), skel)
        pairs.append((joints, joints + rng.normal(scale=0.01, size=(7, 3))))
    bank = train_bank(pairs, [WALKING] * len(pairs), rotations=2)
    path = tmp_path / "bank.json"
    save_bank(bank, path)
    loaded = load_bank(path)
    assert loaded.basis.order == bank.basis.order
    assert loaded.params == bank.params
    assert loaded.ridge == bank.ridge
    for a in range(5):
        if bank.matrices[a] is None:
            assert loaded.matrices[a] is None
        else:
            assert np.array_equal(loaded.matrices[a], bank.matrices[a])


def _values_for(state_k, state_k1, lengths):
    values = {root_key(0): state_k.root, root_key(1): state_k1.root}
    for li in range(6):
        values[rot_key(0, li)] = state_k.rotations[li]
        values[rot_key(1, li)] = state_k1.rotations[li]
        values[len_key(li)] = float(lengths[li])
    return values


def test_factor_residual_zero_when_consistent(skel, rng):
    pairs = []
    for _ in range(200):
        joints = forward_kinematics(random_state(rng), random_lengths(rng), skel)
        pairs.append((joints, joints + rng.normal(scale=0.01, size=(7, 3))))
    bank = train_bank(pairs, [WALKING] * len(pairs), rotations=2)
    joints_k = forward_kinematics(random_state(rng), random_lengths(rng), skel)
    pred = predict_next(joints_k, bank, WALKING)
    r = koopman_residual(joints_k, pred, bank, WALKING)
    assert np.max(np.abs(r)) < 1e-12


@pytest.mark.parametrize("per_coordinate", [False, True])
def test_koopman_factor_fd(skel, rng, per_coordinate):
    pairs = []
    for _ in range(250):
        joints = forward_kinematics(random_state(rng), random_lengths(rng), skel)
        pairs.append((joints, joints + rng.normal(scale=0.02, size=(7, 3))))
    bank = train_bank(pairs, [WALKING] * len(pairs), rotations=2,
                      per_coordinate=per_coordinate)
    for _ in range(15):
        lengths = random_lengths(rng)
        values = _values_for(random_state(rng), random_state(rng), lengths)
        factor = KoopmanTransitionFactor(0, 1, skel, bank, WALKING, sigma=0.05)
        factor_fd_check(factor, values)
