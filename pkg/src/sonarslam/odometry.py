"""Scan-to-local-map odometry with two motion priors.

The constant-velocity prior extrapolates the previous increment; the external
prior replays the increment of a higher-rate odometry stream after
conjugating it into the sonar frame with the camera-sonar extrinsic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sonarslam.geometry import Pose, Scan, compose, conjugate, relative
from sonarslam.registration import (
    AdaptiveThreshold,
    RegistrationParams,
    RegistrationResult,
    register,
)
from sonarslam.voxelmap import VoxelHashMap, voxel_downsample

PRIOR_MODES = ("constant_velocity", "external")


def constant_velocity_prior(t_prev: Pose, t_prev2: Pose) -> Pose:
    """T_prev (T_prev2^-1 T_prev): extrapolate the last increment."""
    return compose(t_prev, relative(t_prev2, t_prev))


def associate_external(stream: Sequence[Pose], t: float) -> Pose:
    """Element with the stamp nearest t; ties break toward the earlier stamp."""
    if not stream:
        raise ValueError("empty external odometry stream")
    stamps = np.array([p.stamp for p in stream], dtype=float)
    j = int(np.searchsorted(stamps, t))
    if j <= 0:
        return stream[0]
    if j >= len(stream):
        return stream[-1]
    before, after = t - stamps[j - 1], stamps[j] - t
    return stream[j - 1] if before <= after else stream[j]


def external_prior(t_prev: Pose, extrinsic: Pose, vio_prev: Pose, vio_now: Pose) -> Pose:
    """Seed registration from the external increment expressed in sonar frame."""
    a = conjugate(extrinsic, vio_prev)
    b = conjugate(extrinsic, vio_now)
    return compose(t_prev, relative(a, b))


@dataclass
class OdometryConfig:
    prior_mode: str = "constant_velocity"
    voxel_size: float = 0.2
    max_points_per_voxel: int = 20
    max_map_range: float = 20.0
    max_iterations: int = 100
    convergence_tol: float = 1e-4
    initial_sigma: float = 0.5
    distance_floor: float = 0.1
    sensor_max_range: float = 15.0
    min_inlier_fraction: float = 0.2  # below this the step is a failure
    prune_every: int = 50

    def __post_init__(self):
        if self.prior_mode not in PRIOR_MODES:
            raise ValueError(f"prior_mode must be one of {PRIOR_MODES}")


@dataclass
class StepRecord:
    stamp: float
    iterations: int
    inlier_rmse: float
    inlier_fraction: float
    converged: bool
    fallback: bool


class ScanOdometry:
    """Sequential scan-matching odometry over a voxel-hashed local map.

    Bootstrap: the first scan is placed at identity; the second uses an
    identity increment (the constant-velocity prior needs two past poses).
    A step whose registration does not converge or keeps too few inliers
    falls back to the prior as the pose and is flagged in the step records.
    """

    def __init__(
        self,
        config: OdometryConfig | None = None,
        extrinsic: Pose | None = None,
        external_stream: Sequence[Pose] | None = None,
    ):
        self.config = config or OdometryConfig()
        if self.config.prior_mode == "external" and not external_stream:
            raise ValueError("external prior mode requires an odometry stream")
        self.extrinsic = extrinsic or Pose.identity()
        self.external_stream = list(external_stream) if external_stream else []
        self.local_map = VoxelHashMap(
            self.config.voxel_size, self.config.max_points_per_voxel, self.config.max_map_range
        )
        self.adaptive = AdaptiveThreshold(
            initial_sigma=self.config.initial_sigma,
            distance_floor=self.config.distance_floor,
            max_range=self.config.sensor_max_range,
        )
        self.t_prev: Pose | None = None
        self.t_prev2: Pose | None = None
        self.records: list[StepRecord] = []
        self._n_steps = 0

    def _prior(self, stamp: float) -> Pose:
        if self.t_prev is None:
            return Pose.identity(stamp)
        if self.config.prior_mode == "external":
            vio_prev = associate_external(self.external_stream, self.t_prev.stamp)
            vio_now = associate_external(self.external_stream, stamp)
            return external_prior(self.t_prev, self.extrinsic, vio_prev, vio_now).with_stamp(stamp)
        if self.t_prev2 is None:
            return self.t_prev.with_stamp(stamp)
        return constant_velocity_prior(self.t_prev, self.t_prev2).with_stamp(stamp)

    def step(self, scan: Scan) -> RegistrationResult:
        if self.t_prev is not None and scan.stamp <= self.t_prev.stamp:
            raise ValueError(f"scan stamp {scan.stamp} not after {self.t_prev.stamp}")
        prior = self._prior(scan.stamp)

        if len(self.local_map) == 0:
            # bootstrap: nothing to register against yet
            result = RegistrationResult(prior, 0, 0.0, 1.0 if len(scan) else 0.0, True)
            fallback = False
        else:
            sigma = self.adaptive.sigma()
            params = RegistrationParams(
                max_iterations=self.config.max_iterations,
                convergence_tol=self.config.convergence_tol,
                max_correspondence_distance=self.adaptive.max_correspondence_distance(),
                kernel_scale=sigma / 3.0,
            )
            result = register(self.local_map, scan.points, prior, params)
            fallback = (not result.converged) or result.inlier_fraction < self.config.min_inlier_fraction
            if fallback:
                result = RegistrationResult(
                    prior, result.iterations, result.inlier_rmse, result.inlier_fraction, False, result.rmse_history
                )
            else:
                self.adaptive.update(relative(prior, result.pose))

        pose = result.pose.with_stamp(scan.stamp)
        if len(scan):
            # the per-voxel cap performs the map downsampling; pre-thinning the
            # scan would bias self-registration away from the exact fixed point
            self.local_map.insert(pose.apply(scan.points), origin=pose.translation)
        self._n_steps += 1
        if self._n_steps % self.config.prune_every == 0:
            self.local_map.prune(pose.translation)

        self.t_prev2, self.t_prev = self.t_prev, pose
        self.records.append(
            StepRecord(scan.stamp, result.iterations, result.inlier_rmse, result.inlier_fraction, result.converged, fallback)
        )
        return RegistrationResult(
            pose, result.iterations, result.inlier_rmse, result.inlier_fraction, result.converged, result.rmse_history
        )

    @property
    def failure_rate(self) -> float:
        if not self.records:
            return 0.0
        return sum(r.fallback for r in self.records) / len(self.records)
