"""Robust point-to-point scan registration.

Gauss-Newton over an se(3) left perturbation with Geman-McClure style
weighting; the source cloud is used at full resolution (the sonar cloud is
already sparse), only the target map is voxel-downsampled elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from sonarslam.geometry import Pose, compose, exp
from sonarslam.voxelmap import VoxelHashMap


@dataclass
class RegistrationParams:
    max_iterations: int = 100
    convergence_tol: float = 1e-4  # norm of the 6-vector update
    max_correspondence_distance: float = 1.5
    kernel_scale: float | None = None  # defaults to max_correspondence_distance / 9

    @property
    def kernel(self) -> float:
        return self.kernel_scale if self.kernel_scale is not None else self.max_correspondence_distance / 9.0


@dataclass
class RegistrationResult:
    pose: Pose
    iterations: int
    inlier_rmse: float
    inlier_fraction: float
    converged: bool
    rmse_history: list = field(default_factory=list)


class AdaptiveThreshold:
    """Correspondence-distance schedule driven by recent model deviations.

    sigma is the RMS of observed deviations between the motion prior and the
    registered pose (translation plus rotation mapped through max_range); the
    search radius is 3 sigma with a hard floor.
    """

    def __init__(self, initial_sigma: float = 0.5, distance_floor: float = 0.1, max_range: float = 15.0, min_motion: float = 0.01):
        self.initial_sigma = initial_sigma
        self.distance_floor = distance_floor
        self.max_range = max_range
        self.min_motion = min_motion
        self._sse = 0.0
        self._count = 0

    def _model_error(self, deviation: Pose) -> float:
        return float(np.linalg.norm(deviation.translation)) + 2.0 * self.max_range * math.sin(
            0.5 * deviation.rotation_angle()
        )

    def sigma(self) -> float:
        if self._count == 0:
            return max(self.initial_sigma, self.distance_floor / 3.0)
        return max(math.sqrt(self._sse / self._count), self.distance_floor / 3.0)

    def max_correspondence_distance(self) -> float:
        return max(3.0 * self.sigma(), self.distance_floor)

    def update(self, deviation: Pose) -> None:
        err = self._model_error(deviation)
        if err > self.min_motion:
            self._sse += err * err
            self._count += 1


def _skew_rows(p: np.ndarray) -> np.ndarray:
    """Stack of skew matrices, (N, 3, 3)."""
    out = np.zeros((p.shape[0], 3, 3))
    out[:, 0, 1] = -p[:, 2]
    out[:, 0, 2] = p[:, 1]
    out[:, 1, 0] = p[:, 2]
    out[:, 1, 2] = -p[:, 0]
    out[:, 2, 0] = -p[:, 1]
    out[:, 2, 1] = p[:, 0]
    return out


def solve_rigid_step(source_world: np.ndarray, target: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """One weighted Gauss-Newton step; returns the se(3) update [w, v].

    Linearizes the residual (exp(delta) p) - q at delta = 0, so the Jacobian
    per point is [-skew(p) | I].
    """
    r = source_world - target
    J = np.concatenate([-_skew_rows(source_world), np.broadcast_to(np.eye(3), (r.shape[0], 3, 3))], axis=2)
    wJ = weights[:, None, None] * J
    H = np.einsum("nij,nik->jk", wJ, J)
    b = np.einsum("nij,ni->j", wJ, r)
    return -np.linalg.solve(H, b)


def _target_points(target) -> np.ndarray:
    if isinstance(target, VoxelHashMap):
        return target.point_array()
    if hasattr(target, "points"):
        return np.asarray(target.points, dtype=float).reshape(-1, 3)
    return np.asarray(target, dtype=float).reshape(-1, 3)


def register(target, source_points: np.ndarray, init: Pose, params: RegistrationParams) -> RegistrationResult:
    """Align source points to the target map starting from `init`.

    Raises ValueError on an empty target. An empty source returns `init`
    unconverged with inlier_fraction 0.
    """
    tgt = _target_points(target)
    if tgt.shape[0] == 0:
        raise ValueError("cannot register against an empty map")
    src = np.asarray(source_points, dtype=float).reshape(-1, 3)
    if src.shape[0] == 0:
        return RegistrationResult(init, 0, float("inf"), 0.0, False)

    tree = cKDTree(tgt)
    tau = params.max_correspondence_distance
    kappa2 = params.kernel**2
    pose = init
    converged = False
    history: list[float] = []
    iterations = 0

    for iterations in range(1, params.max_iterations + 1):
        p_world = pose.apply(src)
        d, idx = tree.query(p_world, distance_upper_bound=tau)
        mask = np.isfinite(d)
        if int(mask.sum()) < 3:
            iterations -= 1
            break
        r = p_world[mask] - tgt[idx[mask]]
        r2 = np.einsum("ij,ij->i", r, r)
        history.append(float(np.sqrt(r2.mean())))
        w = (kappa2 / (kappa2 + r2)) ** 2
        try:
            delta = solve_rigid_step(p_world[mask], tgt[idx[mask]], w)
        except np.linalg.LinAlgError:
            iterations -= 1
            break
        pose = compose(exp(delta), pose)
        if float(np.linalg.norm(delta)) < params.convergence_tol:
            converged = True
            break

    # Report statistics at the final pose
    d, _ = tree.query(pose.apply(src), distance_upper_bound=tau)
    mask = np.isfinite(d)
    n_in = int(mask.sum())
    rmse = float(np.sqrt(np.mean(d[mask] ** 2))) if n_in else float("inf")
    return RegistrationResult(
        pose=pose.with_stamp(init.stamp),
        iterations=iterations,
        inlier_rmse=rmse,
        inlier_fraction=n_in / src.shape[0],
        converged=converged,
        rmse_history=history,
    )
