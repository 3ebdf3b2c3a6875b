"""Scripted trajectories and a synthetic drifting odometry stream.

The external stream stands in for a visual-inertial front end: the ground
truth resampled at a higher rate, with a constant twist bias plus white noise
accumulated on incremental motions.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from sonarslam.geometry import Pose, compose, exp, interpolate, relative
from sonarslam.sonar import seeded_rng


def generate_trajectory(waypoints: Sequence[Pose], speed: float, rate: float) -> list[Pose]:
    """Interpolate waypoints at exactly `rate` Hz, moving at `speed` m/s.

    Translation is linear and rotation slerped within each segment. Segments
    with zero translation take no time: their rotation appears as a jump
    between consecutive samples (useful for scripting aggressive turns).
    """
    if len(waypoints) < 2:
        raise ValueError("need at least 2 waypoints")
    if speed <= 0 or rate <= 0:
        raise ValueError("speed and rate must be positive")

    seg_len = np.array(
        [np.linalg.norm(b.translation - a.translation) for a, b in zip(waypoints[:-1], waypoints[1:])]
    )
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = float(cum[-1])
    duration = total / speed
    n = int(math.floor(duration * rate + 1e-9)) + 1

    out = []
    for i in range(n):
        stamp = i / rate
        arc = min(stamp * speed, total)
        k = int(np.searchsorted(cum, arc, side="right")) - 1
        k = min(k, len(seg_len) - 1)
        alpha = 0.0 if seg_len[k] == 0 else (arc - cum[k]) / seg_len[k]
        out.append(interpolate(waypoints[k], waypoints[k + 1], float(alpha), stamp=stamp))
    return out


def resample_trajectory(truth: Sequence[Pose], stamps: np.ndarray) -> list[Pose]:
    """Interpolate a stamped trajectory at the given stamps (clamped ends)."""
    t = np.array([p.stamp for p in truth], dtype=float)
    out = []
    for s in stamps:
        j = int(np.searchsorted(t, s, side="right"))
        if j <= 0:
            out.append(truth[0].with_stamp(float(s)))
        elif j >= len(truth):
            out.append(truth[-1].with_stamp(float(s)))
        else:
            alpha = (s - t[j - 1]) / (t[j] - t[j - 1])
            out.append(interpolate(truth[j - 1], truth[j], float(alpha), stamp=float(s)))
    return out


def simulate_external_odometry(
    truth: Sequence[Pose],
    rate: float = 30.0,
    drift: np.ndarray | None = None,
    noise_sigma: np.ndarray | None = None,
    seed: int = 0,
) -> list[Pose]:
    """Drifting high-rate odometry derived from ground truth.

    `drift` is a per-second twist bias [wx wy wz vx vy vz]; `noise_sigma` a
    per-axis twist standard deviation applied as a random walk (scaled by
    sqrt(dt)). Deterministic per seed.
    """
    if not truth:
        raise ValueError("empty truth trajectory")
    if rate <= 0:
        raise ValueError("rate must be positive")
    drift = np.zeros(6) if drift is None else np.asarray(drift, dtype=float).reshape(6)
    noise_sigma = np.zeros(6) if noise_sigma is None else np.asarray(noise_sigma, dtype=float).reshape(6)

    t0, t1 = truth[0].stamp, truth[-1].stamp
    n = int(math.floor((t1 - t0) * rate + 1e-9)) + 1
    stamps = t0 + np.arange(n) / rate
    clean = resample_trajectory(truth, stamps)

    rng = seeded_rng(seed, stream=2)
    dt = 1.0 / rate
    out = [clean[0]]
    for k in range(1, n):
        delta = relative(clean[k - 1], clean[k])
        eps = rng.normal(0.0, 1.0, 6) * noise_sigma * math.sqrt(dt)
        corrupted = compose(delta, exp(drift * dt + eps))
        out.append(compose(out[-1], corrupted, stamp=float(stamps[k])))
    return out


def check_strictly_increasing(trajectory: Sequence[Pose]) -> None:
    stamps = [p.stamp for p in trajectory]
    if any(s is None for s in stamps):
        raise ValueError("trajectory has unstamped poses")
    if any(b <= a for a, b in zip(stamps[:-1], stamps[1:])):
        raise ValueError("stamps not strictly increasing")
