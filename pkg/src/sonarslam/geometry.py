"""Rigid-body geometry on SE(3).

Poses are stored as unit quaternion + translation; 4x4 matrices are only
materialized transiently.  Composition follows the column-vector convention:
``compose(a, b)`` applies ``b`` first, then ``a`` (the matrix product a @ b).

Twists are plain 6-vectors ordered rotation-first: ``[wx, wy, wz, vx, vy, vz]``
with the rotational part in radians and the translational part in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_EPS = 1e-12


def _skew(w: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


# ---------------------------------------------------------------------------
# Quaternion algebra (scalar-last: [qx, qy, qz, qw], matching TUM file order)
# ---------------------------------------------------------------------------


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    return np.array(
        [
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
            aw * bw - ax * bx - ay * by - az * bz,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Shepperd's method; returns the canonical (qw >= 0) quaternion."""
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s, 0.25 * s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2
        q = np.empty(4)
        q[i] = 0.25 * s
        q[j] = (m[j, i] + m[i, j]) / s
        q[k] = (m[k, i] + m[i, k]) / s
        q[3] = (m[k, j] - m[j, k]) / s
    return _canonical(q / np.linalg.norm(q))


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate point(s) v ((3,) or (N, 3)) by quaternion q."""
    qv = q[:3]
    uv = np.cross(qv, v)
    uuv = np.cross(qv, uv)
    return v + 2.0 * (q[3] * uv + uuv)


def _canonical(q: np.ndarray) -> np.ndarray:
    # Non-negative scalar part; keeps serialized poses stable across runs.
    if q[3] < 0 or (q[3] == 0 and (q[0] < 0 or (q[0] == 0 and (q[1] < 0 or (q[1] == 0 and q[2] < 0))))):
        return -q
    return q


def quat_slerp(qa: np.ndarray, qb: np.ndarray, alpha: float) -> np.ndarray:
    """Shortest-path spherical interpolation between unit quaternions."""
    dot = float(np.dot(qa, qb))
    if dot < 0.0:
        qb = -qb
        dot = -dot
    if dot > 1.0 - 1e-10:
        q = qa + alpha * (qb - qa)
        return _canonical(q / np.linalg.norm(q))
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    q = (math.sin((1 - alpha) * theta) / s) * qa + (math.sin(alpha * theta) / s) * qb
    return _canonical(q / np.linalg.norm(q))


# ---------------------------------------------------------------------------
# Pose
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pose:
    """Rigid transform on SE(3) with an optional timestamp.

    Attributes:
        rotation: unit quaternion ``[qx, qy, qz, qw]``, canonicalized to
            non-negative scalar part on construction.
        translation: 3-vector in meters.
        stamp: seconds, or ``None`` for untimed poses.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    stamp: float | None = None

    def __post_init__(self):
        q = np.asarray(self.rotation, dtype=float).reshape(4)
        n = np.linalg.norm(q)
        if not np.isfinite(n) or n < _EPS:
            raise ValueError(f"invalid quaternion {q!r}")
        q = _canonical(q / n)
        t = np.asarray(self.translation, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError(f"non-finite translation {t!r}")
        q.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity(stamp: float | None = None) -> "Pose":
        return Pose(stamp=stamp)

    @staticmethod
    def from_matrix(m: np.ndarray, stamp: float | None = None) -> "Pose":
        m = np.asarray(m, dtype=float)
        return Pose(quat_from_matrix(m[:3, :3]), m[:3, 3], stamp)

    @staticmethod
    def from_axis_angle(axis: Sequence[float], angle: float, translation: Sequence[float] = (0, 0, 0), stamp: float | None = None) -> "Pose":
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        h = 0.5 * angle
        return Pose(np.array([*(math.sin(h) * a), math.cos(h)]), translation, stamp)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.rotation)
        m[:3, 3] = self.translation
        return m

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.rotation)

    def rotation_angle(self) -> float:
        """Rotation angle in [0, pi], stable near both 0 and pi."""
        q = self.rotation
        return 2.0 * math.atan2(float(np.linalg.norm(q[:3])), abs(float(q[3])))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """R @ x + t for a single point (3,) or a batch (N, 3)."""
        return quat_rotate(self.rotation, np.asarray(points, dtype=float)) + self.translation

    def with_stamp(self, stamp: float | None) -> "Pose":
        return Pose(self.rotation, self.translation, stamp)

    def __repr__(self):  # compact, round-trippable enough for logs
        t = self.translation
        q = self.rotation
        s = "" if self.stamp is None else f", stamp={self.stamp:.6f}"
        return f"Pose(t=[{t[0]:.6g} {t[1]:.6g} {t[2]:.6g}], q=[{q[0]:.6g} {q[1]:.6g} {q[2]:.6g} {q[3]:.6g}]{s})"


def compose(a: Pose, b: Pose, stamp: float | None = None) -> Pose:
    """Transform applying b then a (the matrix product a @ b)."""
    return Pose(
        quat_multiply(a.rotation, b.rotation),
        quat_rotate(a.rotation, b.translation) + a.translation,
        stamp,
    )


def inverse(a: Pose) -> Pose:
    qc = quat_conjugate(a.rotation)
    return Pose(qc, -quat_rotate(qc, a.translation))


def conjugate(delta: Pose, p: Pose) -> Pose:
    """Express p in the frame related by delta: delta @ p @ delta^-1."""
    return compose(compose(delta, p), inverse(delta))


def relative(a: Pose, b: Pose) -> Pose:
    """Increment taking a to b: a^-1 @ b."""
    return compose(inverse(a), b)


# ---------------------------------------------------------------------------
# Exponential / logarithm maps
# ---------------------------------------------------------------------------


def exp(twist: np.ndarray) -> Pose:
    """SE(3) exponential of a twist [wx, wy, wz, vx, vy, vz]."""
    xi = np.asarray(twist, dtype=float).reshape(6)
    w, v = xi[:3], xi[3:]
    theta = float(np.linalg.norm(w))
    if theta < 1e-8:
        # 2nd-order Taylor of the quaternion and of V
        q = np.array([*(0.5 * w * (1.0 - theta * theta / 24.0)), 1.0])
        q /= np.linalg.norm(q)
        V = np.eye(3) + 0.5 * _skew(w) + _skew(w) @ _skew(w) / 6.0
    else:
        axis = w / theta
        q = np.array([*(math.sin(0.5 * theta) * axis), math.cos(0.5 * theta)])
        K = _skew(w)
        B = (1.0 - math.cos(theta)) / theta**2
        C = (theta - math.sin(theta)) / theta**3
        V = np.eye(3) + B * K + C * (K @ K)
    return Pose(q, V @ v)


def log(p: Pose) -> np.ndarray:
    """SE(3) logarithm; requires rotation angle < pi for uniqueness."""
    q = p.rotation
    s = float(np.linalg.norm(q[:3]))
    c = abs(float(q[3]))
    theta = 2.0 * math.atan2(s, c)
    if s < 1e-10:
        w = 2.0 * q[:3] * (1.0 if q[3] >= 0 else -1.0)
    else:
        w = (theta / s) * q[:3] * (1.0 if q[3] >= 0 else -1.0)
    if theta < 1e-8:
        Vinv = np.eye(3) - 0.5 * _skew(w) + _skew(w) @ _skew(w) / 12.0
    else:
        K = _skew(w)
        half = 0.5 * theta
        # D = (1 - (theta/2)/tan(theta/2)) / theta^2, stable up to theta -> pi
        D = (1.0 - half / math.tan(half)) / theta**2
        Vinv = np.eye(3) - 0.5 * K + D * (K @ K)
    return np.concatenate([w, Vinv @ p.translation])


def interpolate(a: Pose, b: Pose, alpha: float, stamp: float | None = None) -> Pose:
    """Linear translation + slerp rotation between two poses."""
    return Pose(
        quat_slerp(a.rotation, b.rotation, alpha),
        (1.0 - alpha) * a.translation + alpha * b.translation,
        stamp,
    )


def adjoint(p: Pose) -> np.ndarray:
    """6x6 adjoint mapping twists between frames, in [w, v] ordering."""
    R = p.rotation_matrix()
    ad = np.zeros((6, 6))
    ad[:3, :3] = R
    ad[3:, 3:] = R
    ad[3:, :3] = _skew(p.translation) @ R
    return ad


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------


@dataclass
class PointCloud:
    """3D points in meters, with optional per-point intensity in [0, 1]."""

    points: np.ndarray
    intensity: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        self.points = pts
        if self.intensity is not None:
            inten = np.asarray(self.intensity, dtype=float).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValueError("intensity length does not match point count")
            if inten.size and (inten.min() < 0.0 or inten.max() > 1.0):
                raise ValueError("intensity outside [0, 1]")
            self.intensity = inten

    def __len__(self) -> int:
        return self.points.shape[0]

    @staticmethod
    def empty() -> "PointCloud":
        return PointCloud(np.zeros((0, 3)))


@dataclass
class Scan(PointCloud):
    """A sonar frame: range returns in the sensor frame at one timestamp."""

    stamp: float = 0.0


def transform_cloud(p: Pose, c: PointCloud) -> PointCloud:
    """Apply R @ x + t to every point; order and intensity preserved."""
    if len(c) == 0:
        out_pts = c.points.copy()
    else:
        out_pts = p.apply(c.points)
    inten = None if c.intensity is None else c.intensity.copy()
    if isinstance(c, Scan):
        return Scan(out_pts, inten, c.stamp)
    return PointCloud(out_pts, inten)


def positions(trajectory: Iterable[Pose]) -> np.ndarray:
    """Stack translations of a pose sequence into an (N, 3) array."""
    return np.array([p.translation for p in trajectory]).reshape(-1, 3)
