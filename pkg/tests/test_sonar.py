import math

import numpy as np
import pytest

from sonarslam.environment import Box, Cylinder, Environment, Material
from sonarslam.geometry import Pose, Scan
from sonarslam.sonar import NoiseConfig, SonarSpec, cast_scan, inject_multipath, scan_seed

IDEAL = Material(reflectivity=1.0, roughness=1.0)
QUIET = NoiseConfig(range_sigma_base=0.0, dropout_base=0.0, seed=7)


def big_wall(x0, material=IDEAL):
    return Box([x0, -60.0, -60.0], [x0 + 1.0, 60.0, 60.0], material)


class TestSonarSpec:
    def test_grid_size(self):
        spec = SonarSpec()
        assert spec.n_azimuth == math.ceil(90 / 0.6) == 150
        assert spec.n_elevation == math.ceil(40 / 2.4) == 17
        assert spec.beam_directions().shape == (150 * 17, 3)

    def test_validation(self):
        with pytest.raises(ValueError):
            SonarSpec(max_range_m=-1.0)
        with pytest.raises(ValueError):
            SonarSpec(h_beam_deg=100.0)


class TestCastScan:
    def test_empty_environment_gives_empty_scan(self):
        scan = cast_scan(Environment([]), Pose.identity(), SonarSpec(), QUIET)
        assert len(scan) == 0

    def test_flat_wall_matches_ray_plane_oracle(self):
        spec = SonarSpec()
        env = Environment([big_wall(5.0)])
        scan = cast_scan(env, Pose.identity(), spec, QUIET)
        assert len(scan) == spec.n_azimuth * spec.n_elevation
        ranges = np.linalg.norm(scan.points, axis=1)
        # ray-plane intersection oracle: t = 5 / d_x per beam direction
        oracle = 5.0 / (scan.points[:, 0] / ranges)
        assert np.max(np.abs(ranges - oracle)) <= spec.range_quantum_m / 2 + 1e-12
        # boresight-adjacent beams (az and el near zero) read 5.000 m
        az = np.degrees(np.arctan2(scan.points[:, 1], scan.points[:, 0]))
        el = np.degrees(np.arcsin(scan.points[:, 2] / ranges))
        boresight = (np.abs(az) < 0.35) & (np.abs(el) < 1.3)
        assert boresight.sum() >= 2
        assert np.all(np.abs(ranges[boresight] - 5.0) <= spec.range_quantum_m)

    def test_wall_beyond_max_range_returns_nothing(self):
        env = Environment([big_wall(16.0)])
        scan = cast_scan(env, Pose.identity(), SonarSpec(), QUIET)
        assert len(scan) == 0

    def test_returns_inside_fov_and_range(self):
        spec = SonarSpec()
        env = Environment(
            [big_wall(4.0, Material(0.8, 0.4)), Box([-2, -3, -3], [-1, 3, 3], Material(0.9, 0.2))]
        )
        pose = Pose.from_axis_angle([0, 0, 1], math.radians(20.0), [0.5, -0.3, 0.1])
        scan = cast_scan(env, pose, spec, NoiseConfig(range_sigma_base=0.03, dropout_base=0.1, seed=3))
        r = np.linalg.norm(scan.points, axis=1)
        az = np.degrees(np.arctan2(scan.points[:, 1], scan.points[:, 0]))
        el = np.degrees(np.arcsin(scan.points[:, 2] / r))
        assert np.all(r <= spec.max_range_m + 1e-12)
        assert np.all(np.abs(az) <= spec.h_fov_deg / 2 + spec.h_beam_deg)
        assert np.all(np.abs(el) <= spec.v_fov_deg / 2 + spec.v_beam_deg)

    def test_noise_free_points_lie_on_surfaces(self):
        spec = SonarSpec()
        env = Environment([big_wall(5.0), Box([2.0, 1.0, -1.0], [3.0, 2.0, 1.0], IDEAL)])
        pose = Pose(translation=[0.0, 0.5, 0.0])
        scan = cast_scan(env, pose, spec, QUIET)
        world = pose.apply(scan.points)
        assert np.max(env.surface_distance(world)) <= spec.range_quantum_m

    def test_determinism_byte_for_byte(self):
        spec = SonarSpec()
        env = Environment([big_wall(5.0, Material(0.7, 0.3))])
        noise = NoiseConfig(range_sigma_base=0.02, dropout_base=0.2, seed=42)
        a = cast_scan(env, Pose.identity(), spec, noise)
        b = cast_scan(env, Pose.identity(), spec, noise)
        assert a.points.tobytes() == b.points.tobytes()
        assert a.intensity.tobytes() == b.intensity.tobytes()

    def test_different_seed_differs(self):
        env = Environment([big_wall(5.0, Material(0.7, 0.3))])
        noise = NoiseConfig(range_sigma_base=0.02, seed=1)
        a = cast_scan(env, Pose.identity(), SonarSpec(), noise)
        b = cast_scan(env, Pose.identity(), SonarSpec(), noise.for_scan(99))
        assert a.points.tobytes() != b.points.tobytes()

    def test_per_scan_seed_derivation(self):
        assert scan_seed(10, 3) == 10 ^ 3
        assert NoiseConfig(seed=10).for_scan(3).seed == 10 ^ 3


class TestMaterialResponse:
    def test_detection_rate_monotone_in_roughness(self):
        # Same seed and geometry: identical uniforms per beam, so a pointwise
        # larger keep probability can only add detections.
        spec = SonarSpec()
        noise = NoiseConfig(seed=5)
        counts = []
        for rough in (0.0, 0.25, 0.5, 0.75, 1.0):
            env = Environment([big_wall(5.0, Material(0.9, rough))])
            pose = Pose.from_axis_angle([0, 0, 1], math.radians(30.0))
            counts.append(len(cast_scan(env, pose, spec, noise)))
        assert all(b >= a for a, b in zip(counts, counts[1:]))
        assert counts[-1] > counts[0]

    def test_detection_rate_monotone_in_incidence(self):
        spec = SonarSpec(h_beam_deg=0.45, v_beam_deg=0.8)  # 200 x 50 = 10k beams
        noise = NoiseConfig(seed=5)
        env = Environment([big_wall(5.0, Material(0.9, 0.1))])
        rates = []
        for yaw in (0.0, 10.0, 20.0, 30.0, 40.0):
            pose = Pose.from_axis_angle([0, 0, 1], math.radians(yaw))
            scan = cast_scan(env, pose, spec, noise)
            rates.append(len(scan) / (spec.n_azimuth * spec.n_elevation))
        assert all(b <= a for a, b in zip(rates, rates[1:]))
        assert rates[-1] < rates[0]

    def test_smooth_surface_noisier(self):
        # sigma(roughness) = base * (2 - roughness): smooth surfaces spread more
        spec = SonarSpec(range_quantum_m=1e-6)
        noise = NoiseConfig(range_sigma_base=0.02, seed=11)
        spreads = []
        for rough in (0.05, 0.95):
            env = Environment([big_wall(5.0, Material(1.0, rough))])
            scan = cast_scan(env, Pose.identity(), spec, noise)
            ranges = np.linalg.norm(scan.points, axis=1)
            oracle = 5.0 / (scan.points[:, 0] / ranges)
            spreads.append(np.std(ranges - oracle))
        assert spreads[0] > spreads[1] * 1.5


class TestMultipath:
    def test_rate_zero_unchanged(self):
        env = Environment([big_wall(6.0, Material(0.9, 0.2, mirror_gain=1.0))])
        scan = Scan(np.array([[5.5, 0.2, 0.0]]), np.array([0.9]), 1.0)
        out = inject_multipath(scan, env, Pose.identity(), SonarSpec(), NoiseConfig(multipath_enable=True, multipath_rate=0.0, seed=1))
        assert np.allclose(out.points, scan.points)

    def test_disabled_returns_input(self):
        env = Environment([big_wall(6.0, Material(0.9, 0.2, mirror_gain=1.0))])
        scan = Scan(np.array([[5.5, 0.2, 0.0]]), None, 1.0)
        out = inject_multipath(scan, env, Pose.identity(), SonarSpec(), NoiseConfig(multipath_enable=False, seed=1))
        assert out is scan

    def test_single_mirror_ghost_matches_reflection_oracle(self):
        wall = big_wall(6.0, Material(0.9, 0.2, mirror_gain=1.0))
        env = Environment([wall])
        scan = Scan(np.array([[5.5, 0.2, 0.0]]), np.array([0.9]), 1.0)
        noise = NoiseConfig(multipath_enable=True, multipath_rate=1.0, seed=1)
        out = inject_multipath(scan, env, Pose.identity(), SonarSpec(), noise)
        assert len(out) == 2
        # reflection-across-plane oracle: plane x = 6, normal -x
        expected = np.array([5.5, 0.2, 0.0]) - 2.0 * (5.5 - 6.0) * np.array([1.0, 0.0, 0.0])
        assert np.allclose(out.points[1], expected, atol=1e-12)

    def test_point_count_never_decreases(self):
        env = Environment([big_wall(6.0, Material(0.9, 0.2, mirror_gain=0.5))])
        rng = np.random.default_rng(0)
        pts = np.column_stack([rng.uniform(3, 5.5, 50), rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50)])
        scan = Scan(pts, None, 0.0)
        noise = NoiseConfig(multipath_enable=True, multipath_rate=0.5, seed=2)
        out = inject_multipath(scan, env, Pose.identity(), SonarSpec(), noise)
        assert len(out) >= len(scan)
        assert np.allclose(out.points[: len(scan)], scan.points)

    def test_ring_artifact_beyond_open_cylinder_end(self):
        # open-ended tube along +x: ring band appears at a distance matching
        # the tube length, as seen in confined-container data
        cyl = Cylinder([2.0, 0.0, 0.0], [12.0, 0.0, 0.0], radius=1.0, material=Material(0.9, 0.2, mirror_gain=0.0))
        env = Environment([cyl])
        scan = Scan(np.zeros((0, 3)), None, 0.0)
        noise = NoiseConfig(multipath_enable=True, multipath_rate=0.0, ring_artifact_enable=True, ring_radius=0.4, ring_points=24, seed=3)
        out = inject_multipath(scan, env, Pose.identity(), SonarSpec(), noise)
        assert len(out) == 48
        radial = np.hypot(out.points[:, 1], out.points[:, 2])
        assert np.allclose(np.sort(np.unique(np.round(radial, 6))), [0.4, 0.46])
        assert np.allclose(out.points[:, 0], 10.0, atol=0.05)

    def test_ring_suppressed_beyond_max_range(self):
        env = Environment([Box([-20, -20, -3], [20, 20, 3], IDEAL)])
        scan = Scan(np.zeros((0, 3)), None, 0.0)
        noise = NoiseConfig(multipath_enable=True, ring_artifact_enable=True, seed=3)
        out = inject_multipath(scan, env, Pose.identity(), SonarSpec(), noise)
        assert len(out) == 0

    def test_determinism(self):
        env = Environment([big_wall(6.0, Material(0.9, 0.2, mirror_gain=0.7))])
        rng = np.random.default_rng(1)
        pts = np.column_stack([rng.uniform(3, 5.5, 30), rng.uniform(-1, 1, 30), rng.uniform(-1, 1, 30)])
        noise = NoiseConfig(multipath_enable=True, multipath_rate=0.6, seed=9)
        a = inject_multipath(Scan(pts, None, 0.0), env, Pose.identity(), SonarSpec(), noise)
        b = inject_multipath(Scan(pts, None, 0.0), env, Pose.identity(), SonarSpec(), noise)
        assert a.points.tobytes() == b.points.tobytes()
