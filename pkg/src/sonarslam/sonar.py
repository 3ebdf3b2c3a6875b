"""Compact 3D sonar model: beam grid, material response, multipath faults.

Sensor frame: x is the boresight (forward), y left, z up. Azimuth rotates
about z, elevation about -y, so a direction is
``[cos(el)cos(az), cos(el)sin(az), sin(el)]``.

Detection keeps a beam with probability
``reflectivity * (roughness + (1 - roughness) * cos(theta)^4)`` where theta is
the incidence angle: smooth surfaces drop out and get noisy at grazing angles
while rough surfaces return stably. Range noise is Gaussian with
``sigma = range_sigma_base * (2 - roughness)``, then quantized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from sonarslam.environment import Environment
from sonarslam.geometry import Pose, Scan, inverse

COS_EXPONENT = 4


def seeded_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for a (seed, stream) pair; portable across platforms."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


def scan_seed(seed: int, index: int) -> int:
    """Per-scan derived seed so parallel generation is schedule-independent."""
    return (int(seed) ^ int(index)) & (2**64 - 1)


@dataclass(frozen=True)
class SonarSpec:
    """Sensor envelope: field of view, range, rate, beam and quantization."""

    h_fov_deg: float = 90.0
    v_fov_deg: float = 40.0
    max_range_m: float = 15.0
    rate_hz: float = 5.0
    h_beam_deg: float = 0.6
    v_beam_deg: float = 2.4
    range_quantum_m: float = 0.004

    def __post_init__(self):
        for name in ("h_fov_deg", "v_fov_deg", "max_range_m", "rate_hz", "h_beam_deg", "v_beam_deg", "range_quantum_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.h_beam_deg > self.h_fov_deg or self.v_beam_deg > self.v_fov_deg:
            raise ValueError("beam width exceeds field of view")

    @property
    def n_azimuth(self) -> int:
        return math.ceil(self.h_fov_deg / self.h_beam_deg)

    @property
    def n_elevation(self) -> int:
        return math.ceil(self.v_fov_deg / self.v_beam_deg)

    def beam_directions(self) -> np.ndarray:
        """Unit directions of the az/el beam lattice, sensor frame, (N, 3)."""
        az = (np.arange(self.n_azimuth) + 0.5) / self.n_azimuth - 0.5
        az = np.radians(az * self.h_fov_deg)
        el = (np.arange(self.n_elevation) + 0.5) / self.n_elevation - 0.5
        el = np.radians(el * self.v_fov_deg)
        azg, elg = np.meshgrid(az, el, indexing="ij")
        azf, elf = azg.ravel(), elg.ravel()
        return np.column_stack(
            [np.cos(elf) * np.cos(azf), np.cos(elf) * np.sin(azf), np.sin(elf)]
        )


@dataclass(frozen=True)
class NoiseConfig:
    """Stochastic fault model; probabilities in [0, 1], sigma >= 0."""

    range_sigma_base: float = 0.0
    dropout_base: float = 0.0
    multipath_enable: bool = False
    multipath_rate: float = 0.02
    ring_artifact_enable: bool = False
    ring_distance: float | None = None
    ring_radius: float = 0.4
    ring_radius_ratio: float = 1.15
    ring_points: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.range_sigma_base < 0:
            raise ValueError("range_sigma_base must be >= 0")
        for name in ("dropout_base", "multipath_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [0, 1]")

    def for_scan(self, index: int) -> "NoiseConfig":
        return replace(self, seed=scan_seed(self.seed, index))


def cast_scan(env: Environment, sensor_pose: Pose, spec: SonarSpec, noise: NoiseConfig, stamp: float = 0.0) -> Scan:
    """Simulate one sonar frame; returns ranges as points in the sensor frame.

    Deterministic for fixed inputs and seed. An empty scan is a valid result.
    """
    dirs_sensor = spec.beam_directions()
    R = sensor_pose.rotation_matrix()
    dirs_world = dirs_sensor @ R.T
    ranges, normals, surf_idx = env.raycast(sensor_pose.translation, dirs_world)

    hit = np.isfinite(ranges) & (ranges <= spec.max_range_m)
    if not np.any(hit):
        return Scan(np.zeros((0, 3)), np.zeros(0), stamp)

    rng = seeded_rng(noise.seed, stream=0)
    # One uniform and one normal draw per beam keeps the stream layout
    # independent of which beams hit, so edits to the environment do not
    # scramble unrelated beams.
    u = rng.uniform(size=dirs_sensor.shape[0])
    g = rng.normal(size=dirs_sensor.shape[0])

    refl = np.array([env.surfaces[k].material.reflectivity if k >= 0 else 0.0 for k in surf_idx])
    rough = np.array([env.surfaces[k].material.roughness if k >= 0 else 0.0 for k in surf_idx])
    cos_inc = np.clip(-np.einsum("ij,ij->i", dirs_world, normals), 0.0, 1.0)

    p_keep = refl * (rough + (1.0 - rough) * cos_inc**COS_EXPONENT)
    keep = hit & (u < p_keep * (1.0 - noise.dropout_base))

    sigma = noise.range_sigma_base * (2.0 - rough)
    r = ranges + g * sigma
    r = np.round(r / spec.range_quantum_m) * spec.range_quantum_m
    keep &= (r > 0.0) & (r <= spec.max_range_m)

    pts = dirs_sensor[keep] * r[keep, None]
    inten = np.clip(p_keep[keep], 0.0, 1.0)
    return Scan(pts, inten, stamp)


def _in_envelope(points_sensor: np.ndarray, spec: SonarSpec) -> np.ndarray:
    """Mask of points inside the FOV pyramid (plus one beam) and max range."""
    r = np.linalg.norm(points_sensor, axis=1)
    az = np.degrees(np.arctan2(points_sensor[:, 1], points_sensor[:, 0]))
    with np.errstate(invalid="ignore"):
        el = np.degrees(np.arcsin(np.clip(points_sensor[:, 2] / np.maximum(r, 1e-12), -1, 1)))
    return (
        (r > 0)
        & (r <= spec.max_range_m)
        & (np.abs(az) <= spec.h_fov_deg / 2 + spec.h_beam_deg)
        & (np.abs(el) <= spec.v_fov_deg / 2 + spec.v_beam_deg)
    )


def inject_multipath(scan: Scan, env: Environment, sensor_pose: Pose, spec: SonarSpec, noise: NoiseConfig) -> Scan:
    """Append multipath ghost points to a scan.

    Mirror ghosts re-reflect true returns across the plane of each specular
    surface (image method: the ghost range equals the summed echo path).
    The optional ring artifact adds two concentric annuli on the boresight at
    a distance set by the dominant environment dimension. Ghosts outside the
    sensor envelope are discarded; the output never has fewer points than the
    input.
    """
    if not noise.multipath_enable:
        return scan

    rng = seeded_rng(noise.seed, stream=1)
    world = sensor_pose.apply(scan.points) if len(scan) else np.zeros((0, 3))
    inv_pose = inverse(sensor_pose)

    ghost_pts = []
    ghost_inten = []
    for surf in env.mirror_surfaces():
        gain = surf.material.mirror_gain
        u = rng.uniform(size=len(scan))
        chosen = np.nonzero(u < noise.multipath_rate * gain)[0]
        for i in chosen:
            plane = surf.nearest_mirror_plane(world[i])
            if plane is None:
                continue
            p0, n = plane
            ghost_world = world[i] - 2.0 * float((world[i] - p0) @ n) * n
            ghost_pts.append(inv_pose.apply(ghost_world))
            ghost_inten.append(gain * (scan.intensity[i] if scan.intensity is not None else 1.0))

    if noise.ring_artifact_enable:
        d_ring = noise.ring_distance if noise.ring_distance is not None else env.dominant_dimension()
        for radius in (noise.ring_radius, noise.ring_radius * noise.ring_radius_ratio):
            if d_ring <= 0 or math.hypot(d_ring, radius) > spec.max_range_m:
                continue
            phi = np.linspace(0.0, 2.0 * math.pi, noise.ring_points, endpoint=False)
            phi = phi + rng.uniform(0, 2 * math.pi / noise.ring_points)
            x = d_ring + rng.normal(0.0, 2.0 * spec.range_quantum_m, noise.ring_points)
            ring = np.column_stack([x, radius * np.cos(phi), radius * np.sin(phi)])
            ghost_pts.extend(ring)
            ghost_inten.extend([0.2] * noise.ring_points)

    if not ghost_pts:
        return scan

    ghosts = np.asarray(ghost_pts).reshape(-1, 3)
    inten = np.clip(np.asarray(ghost_inten, dtype=float), 0.0, 1.0)
    ok = _in_envelope(ghosts, spec)
    ghosts, inten = ghosts[ok], inten[ok]

    base_inten = scan.intensity if scan.intensity is not None else np.ones(len(scan))
    return Scan(
        np.vstack([scan.points, ghosts]),
        np.concatenate([base_inten, inten]),
        scan.stamp,
    )
