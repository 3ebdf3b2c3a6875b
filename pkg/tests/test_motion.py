import math

import numpy as np
import pytest

from sonarslam.geometry import Pose, compose, inverse, positions
from sonarslam.motion import (
    check_strictly_increasing,
    generate_trajectory,
    resample_trajectory,
    simulate_external_odometry,
)


def trans(x, y, z, stamp=None):
    return Pose(translation=[x, y, z], stamp=stamp)


class TestGenerateTrajectory:
    def test_coincident_waypoints_constant(self):
        wp = Pose.from_axis_angle([0, 0, 1], 0.4, [1.0, 2.0, 3.0])
        out = generate_trajectory([wp, wp], speed=1.0, rate=5.0)
        for p in out:
            assert np.allclose(p.translation, wp.translation)
            assert np.allclose(p.rotation, wp.rotation)

    def test_straight_segment_spacing(self):
        out = generate_trajectory([trans(0, 0, 0), trans(10, 0, 0)], speed=1.0, rate=5.0)
        assert len(out) == 51
        pos = positions(out)
        steps = np.diff(pos[:, 0])
        assert np.allclose(steps, 0.2, atol=1e-9)
        assert np.allclose(out[0].translation, [0, 0, 0])
        assert np.allclose(out[-1].translation, [10, 0, 0])
        assert np.allclose([p.stamp for p in out], np.arange(51) / 5.0)

    def test_closed_rectangle_returns_to_start(self):
        wps = [trans(0, 0, 0), trans(8, 0, 0), trans(8, 5, 0), trans(0, 5, 0), trans(0, 0, 0)]
        out = generate_trajectory(wps, speed=1.3, rate=5.0)
        step = 1.3 / 5.0
        assert np.linalg.norm(out[-1].translation - out[0].translation) <= step + 1e-9

    def test_rotation_slerped_within_segment(self):
        a = trans(0, 0, 0)
        b = Pose.from_axis_angle([0, 0, 1], math.radians(90), [10, 0, 0])
        out = generate_trajectory([a, b], speed=1.0, rate=1.0)
        mid = out[5]  # halfway in arc length
        assert np.isclose(math.degrees(mid.rotation_angle()), 45.0, atol=1e-6)

    def test_too_few_waypoints(self):
        with pytest.raises(ValueError):
            generate_trajectory([trans(0, 0, 0)], speed=1.0, rate=5.0)

    def test_stamps_strictly_increasing(self):
        out = generate_trajectory([trans(0, 0, 0), trans(3, 0, 0)], speed=0.7, rate=5.0)
        check_strictly_increasing(out)


class TestResample:
    def test_exact_and_clamped(self):
        traj = [trans(0, 0, 0, stamp=0.0), trans(1, 0, 0, stamp=1.0), trans(1, 2, 0, stamp=3.0)]
        out = resample_trajectory(traj, np.array([-1.0, 0.5, 2.0, 9.0]))
        assert np.allclose(out[0].translation, [0, 0, 0])
        assert np.allclose(out[1].translation, [0.5, 0, 0])
        assert np.allclose(out[2].translation, [1, 1, 0])
        assert np.allclose(out[3].translation, [1, 2, 0])


class TestExternalOdometry:
    def test_zero_drift_zero_noise_resamples_truth(self):
        truth = generate_trajectory([trans(0, 0, 0), trans(5, 0, 0)], speed=1.0, rate=5.0)
        out = simulate_external_odometry(truth, rate=30.0, seed=4)
        ref = resample_trajectory(truth, np.array([p.stamp for p in out]))
        for got, want in zip(out, ref):
            assert np.linalg.norm(got.translation - want.translation) < 1e-9
            assert compose(inverse(got), want).rotation_angle() < 1e-9

    def test_pure_z_bias_integrates(self):
        # integration oracle: 0.01 m/s over 100 s of static truth -> z = 1.0
        static = [Pose(translation=[0, 0, 0], stamp=float(t)) for t in range(0, 101)]
        drift = np.array([0, 0, 0, 0, 0, 0.01])
        out = simulate_external_odometry(static, rate=30.0, drift=drift, seed=0)
        assert np.isclose(out[-1].translation[2], 0.01 * 100.0, atol=1e-9)

    def test_deterministic_per_seed(self):
        truth = generate_trajectory([trans(0, 0, 0), trans(4, 1, 0)], speed=1.0, rate=5.0)
        sigma = np.array([0.001, 0.001, 0.002, 0.01, 0.01, 0.01])
        a = simulate_external_odometry(truth, rate=30.0, noise_sigma=sigma, seed=11)
        b = simulate_external_odometry(truth, rate=30.0, noise_sigma=sigma, seed=11)
        assert all(np.array_equal(x.translation, y.translation) for x, y in zip(a, b))
        assert all(np.array_equal(x.rotation, y.rotation) for x, y in zip(a, b))
        c = simulate_external_odometry(truth, rate=30.0, noise_sigma=sigma, seed=12)
        assert any(not np.array_equal(x.translation, y.translation) for x, y in zip(a, c))

    def test_rate_and_stamps(self):
        truth = generate_trajectory([trans(0, 0, 0), trans(2, 0, 0)], speed=1.0, rate=5.0)
        out = simulate_external_odometry(truth, rate=30.0, seed=0)
        assert len(out) == 61
        check_strictly_increasing(out)
