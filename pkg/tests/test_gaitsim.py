import numpy as np
import pytest

from koopgait.errors import DataError
from koopgait.gaitsim import (
    ActivityScript,
    GaitParams,
    ScriptSegment,
    SensorNoiseConfig,
    depth_sweep_script,
    export_recording,
    generate_trajectory,
    import_recording,
    mixed_script,
    simulate_camera,
    simulate_imu,
    simulate_recording,
    training_campaign,
    walk_script,
)
from koopgait.sensors import imu_feature_vector, preintegrate_rotation
from koopgait.skeleton import forward_kinematics


def standing_script(duration=2.0):
    return ActivityScript((ScriptSegment("standing", duration),), (0.0, 4.0))


# --- scripts -------------------------------------------------------------------


def test_incompatible_transition_rejected():
    with pytest.raises(ValueError, match="incompatible transition"):
        ActivityScript((
            ScriptSegment("walking", 2.0),
            ScriptSegment("sitting_down", 1.0),
        ))


def test_heading_change_after_standing_pivots_on_right_foot():
    script = ActivityScript((
        ScriptSegment("walking", 2.0, 1.0, heading=0.0),
        ScriptSegment("standing", 1.0),
        ScriptSegment("walking", 2.0, 1.0, heading=np.pi / 2),
    ), (0.0, 4.0))
    truth = generate_trajectory(script, GaitParams())
    boundary = int(round(3.0 * 120))
    # the right foot does not move across the pivot instant
    before = truth.joints[boundary - 1, 3]
    after = truth.joints[boundary + 1, 3]
    assert np.linalg.norm(after - before) < 1e-9
    # the second walk heads along +x
    disp = truth.joints[-1, 0] - truth.joints[boundary + 5, 0]
    assert disp[0] > 1.0 and abs(disp[2]) < 0.2


def test_gait_params_validation():
    with pytest.raises(ValueError):
        GaitParams(link_lengths=(0.1,) * 6)
    with pytest.raises(ValueError):
        GaitParams(stride_frequency=2.0)
    with pytest.raises(ValueError):
        GaitParams(stance_duty=0.8)


def test_infeasible_speed_rejected():
    params = GaitParams()
    with pytest.raises(ValueError, match="amplitude"):
        generate_trajectory(walk_script(2.0, speed=5.0), params)


# --- ground truth --------------------------------------------------------------


def test_walk_displacement_matches_speed():
    params = GaitParams()
    truth = generate_trajectory(walk_script(10.0, speed=1.0), params)
    disp = truth.states[-1].root - truth.states[0].root
    along = disp[2]  # heading 0 walks along +z
    assert abs(along - 10.0) <= 0.02 * 10.0
    assert abs(disp[0]) < 1e-9 and abs(disp[1]) < 1e-9


def test_standing_is_static():
    truth = generate_trajectory(standing_script(), GaitParams())
    vel = np.diff(truth.joints, axis=0) * 120.0
    assert np.max(np.abs(vel)) < 1e-9


def test_stance_foot_stationary_between_keyframes():
    params = GaitParams(stance_duty=0.55)
    truth = generate_trajectory(walk_script(6.0, 1.0), params)
    joints = truth.joints[::4]
    contacts = truth.contacts[::4]
    worst = 0.0
    for k in range(len(joints) - 1):
        for foot, joint in ((0, 3), (1, 6)):
            if contacts[k, foot] and contacts[k + 1, foot]:
                worst = max(worst, float(np.linalg.norm(joints[k + 1, joint] - joints[k, joint])))
    assert worst < 1e-3


def test_walking_contacts_alternate():
    truth = generate_trajectory(walk_script(5.0, 1.0), GaitParams())
    assert np.all(truth.contacts.sum(axis=1) >= 1)
    # both single-support phases occur
    assert np.any(truth.contacts[:, 0] & ~truth.contacts[:, 1])
    assert np.any(truth.contacts[:, 1] & ~truth.contacts[:, 0])


def test_link_lengths_constant_and_consistent():
    params = GaitParams()
    truth = generate_trajectory(mixed_script(), params)
    lengths = np.asarray(params.link_lengths)
    links = ((0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6))
    for k in range(0, len(truth.joints), 47):
        for li, (i, j) in enumerate(links):
            d = np.linalg.norm(truth.joints[k, j] - truth.joints[k, i])
            assert abs(d - lengths[li]) < 1e-12


def test_labels_partition_every_frame():
    truth = generate_trajectory(mixed_script(), GaitParams())
    assert len(truth.labels) == len(truth.times)
    assert set(np.unique(truth.labels)) == {0, 1, 2, 3, 4}


def test_feet_on_ground_during_walk():
    truth = generate_trajectory(walk_script(4.0, 1.0), GaitParams())
    contacts = truth.contacts
    for foot, joint in ((0, 3), (1, 6)):
        heights = truth.joints[contacts[:, foot], joint, 1]
        assert np.max(np.abs(heights)) < 1e-9


def test_fk_reproduces_generator_joints(skel):
    params = GaitParams()
    truth = generate_trajectory(mixed_script(), params)
    for k in range(0, len(truth.states), 101):
        joints = forward_kinematics(truth.states[k], np.asarray(params.link_lengths), skel)
        assert np.max(np.abs(joints - truth.joints[k])) < 1e-12


# --- IMU simulation -------------------------------------------------------------


def test_zero_noise_standing_imu():
    truth = generate_trajectory(standing_script(), GaitParams())
    streams = simulate_imu(truth, SensorNoiseConfig.zero())
    for s in streams.values():
        assert np.max(np.abs(s.gyro)) < 1e-12
        assert np.max(np.abs(np.linalg.norm(s.accel, axis=1) - 9.81)) < 1e-9


def test_zero_noise_preintegration_consistency():
    params = GaitParams()
    truth = generate_trajectory(walk_script(3.0, 1.0), params)
    streams = simulate_imu(truth, SensorNoiseConfig.zero())
    times = truth.times
    for link, stream in streams.items():
        for k in (0, 7, 20):
            t0, t1 = times[4 * k], times[4 * (k + 1)]
            meas = preintegrate_rotation(stream, t0, t1)
            expected = truth.states[4 * k].rotations[link].T @ truth.states[4 * (k + 1)].rotations[link]
            assert np.max(np.abs(meas.delta_r - expected)) < 1e-6


def test_gyro_noise_std_matches_config():
    truth = generate_trajectory(standing_script(85.0), GaitParams())
    noise = SensorNoiseConfig(gyro_sigma=0.02, seed=3)
    streams = simulate_imu(truth, noise)
    samples = streams[1].gyro.reshape(-1)
    assert len(samples) > 10_000
    assert abs(np.std(samples) - 0.02) < 0.1 * 0.02


def test_swing_amplitude_raises_shank_feature():
    feats = []
    for speed in (0.5, 0.8, 1.2):
        truth = generate_trajectory(walk_script(6.0, speed), GaitParams())
        streams = simulate_imu(truth, SensorNoiseConfig.zero())
        vals = [imu_feature_vector(streams, t)[1] for t in (2.0, 3.0, 4.0)]
        feats.append(np.mean(vals))
    assert feats[0] < feats[1] < feats[2]


# --- camera simulation ------------------------------------------------------------


def test_depth_sigma_model():
    noise = SensorNoiseConfig(depth_sigma0=0.01, depth_kappa=0.004)
    assert noise.depth_sigma(10.0) == pytest.approx(0.41)


def test_zero_noise_camera_exact():
    truth = generate_trajectory(walk_script(2.0, 1.0), GaitParams())
    joints = truth.joints[::4]
    kp, kp_valid, depths, d_valid = simulate_camera(joints, SensorNoiseConfig.zero())
    assert np.all(kp_valid) and np.all(d_valid)
    assert np.allclose(kp[..., 0], joints[..., 0] / joints[..., 2])
    assert np.allclose(kp[..., 1], joints[..., 1] / joints[..., 2])
    assert np.allclose(depths, joints[..., 2])


def test_depth_noise_std_at_ten_meters():
    rng = np.random.default_rng(0)
    joints = np.zeros((1500, 7, 3))
    joints[:, :, 2] = 10.0
    noise = SensorNoiseConfig(depth_sigma0=0.01, depth_kappa=0.004)
    _, _, depths, _ = simulate_camera(joints, noise, rng)
    err = (depths - 10.0).reshape(-1)
    assert len(err) >= 10_000
    assert abs(np.std(err) - 0.41) < 0.1 * 0.41


def test_behind_camera_flagged_invalid():
    joints = np.zeros((1, 7, 3))
    joints[0, :, 2] = 5.0
    joints[0, 2, 2] = -1.0
    _, kp_valid, _, d_valid = simulate_camera(joints, SensorNoiseConfig.zero())
    assert not kp_valid[0, 2] and bool(kp_valid[0, 0])
    assert not d_valid[0, 2]


# --- recording files ---------------------------------------------------------------


def test_recording_round_trip_bit_exact(tmp_path):
    noise = SensorNoiseConfig(seed=11)
    rec = simulate_recording(walk_script(3.0, 1.0), GaitParams(), noise)
    path = tmp_path / "rec.jsonl"
    export_recording(rec, path)
    back = import_recording(path)
    assert back.num_keyframes == rec.num_keyframes
    assert np.array_equal(back.times, rec.times)
    assert np.array_equal(back.joints, rec.joints)
    assert np.array_equal(back.labels, rec.labels)
    assert np.array_equal(back.contacts, rec.contacts)
    assert np.array_equal(back.keypoints, rec.keypoints)
    assert np.array_equal(back.depths, rec.depths)
    for k in range(rec.num_keyframes):
        assert np.array_equal(back.states[k].root, rec.states[k].root)
        assert np.array_equal(back.states[k].rotations, rec.states[k].rotations)
    for link in rec.imu:
        assert np.array_equal(back.imu[link].gyro, rec.imu[link].gyro)
        assert np.array_equal(back.imu[link].accel, rec.imu[link].accel)
        assert np.array_equal(back.imu[link].times, rec.imu[link].times)


def test_empty_script_recording_round_trips(tmp_path):
    rec = simulate_recording(ActivityScript((), (0.0, 3.0)), GaitParams(),
                             SensorNoiseConfig.zero())
    assert rec.num_keyframes == 0
    path = tmp_path / "empty.jsonl"
    export_recording(rec, path)
    back = import_recording(path)
    assert back.num_keyframes == 0
    assert len(open(path).read().splitlines()) == 1


def test_truncated_file_names_line(tmp_path):
    rec = simulate_recording(walk_script(1.0, 1.0), GaitParams(), SensorNoiseConfig.zero())
    path = tmp_path / "rec.jsonl"
    export_recording(rec, path)
    lines = open(path).read().splitlines()
    with open(path, "w") as f:
        f.write("\n".join(lines[:10]) + "\n")
    with pytest.raises(DataError, match="line 10"):
        import_recording(path)


def test_malformed_line_reported(tmp_path):
    rec = simulate_recording(walk_script(1.0, 1.0), GaitParams(), SensorNoiseConfig.zero())
    path = tmp_path / "rec.jsonl"
    export_recording(rec, path)
    lines = open(path).read().splitlines()
    lines[3] = lines[3][:-5] + "garbage"
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="line 4"):
        import_recording(path)


def test_version_mismatch(tmp_path):
    rec = simulate_recording(ActivityScript((), (0.0, 3.0)), GaitParams(),
                             SensorNoiseConfig.zero())
    path = tmp_path / "rec.jsonl"
    export_recording(rec, path)
    import json

    header = json.loads(open(path).read().splitlines()[0])
    header["version"] = 99
    with open(path, "w") as f:
        f.write(json.dumps(header) + "\n")
    with pytest.raises(DataError, match="version"):
        import_recording(path)


def test_depth_sweep_covers_range():
    truth = generate_trajectory(depth_sweep_script(speed=1.2), GaitParams())
    z = truth.joints[:, :, 2]
    assert z.min() < 3.5 and z.max() > 11.0


def test_training_campaign_shapes():
    recs = training_campaign(n_subjects=2, n_scripts=3, seed=5)
    assert len(recs) == 6
    labels = np.concatenate([r.labels for r in recs])
    assert set(np.unique(labels)) == {0, 1, 2, 3, 4}
