"""Analytic environments for the sonar simulator.

Surfaces are solid primitives with an acoustic material. Ray queries share a
single origin (the sensor) and are vectorized over ray directions. Normals
returned by ``intersect`` are unit length and oriented against the ray, so
``cos(incidence) = -dot(dir, normal)`` is non-negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_EPS = 1e-9


@dataclass(frozen=True)
class Material:
    """Acoustic response parameters, all in [0, 1].

    reflectivity scales overall return strength; roughness trades
    angle-independent backscatter against specular behavior; mirror_gain
    controls how strongly the surface spawns multipath ghosts.
    """

    reflectivity: float = 0.9
    roughness: float = 0.8
    mirror_gain: float = 0.0

    def __post_init__(self):
        for name in ("reflectivity", "roughness", "mirror_gain"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class Box:
    """Axis-aligned solid box."""

    lo: np.ndarray
    hi: np.ndarray
    material: Material = field(default_factory=Material)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if np.any(hi <= lo):
            raise ValueError(f"degenerate box: lo={lo}, hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray):
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (self.lo - origin) * inv
            t2 = (self.hi - origin) * inv
        lo_t = np.minimum(t1, t2)
        hi_t = np.maximum(t1, t2)
        # Axis-parallel rays outside the slab produce NaNs; force a miss there
        lo_t = np.where(np.isnan(lo_t), -np.inf, lo_t)
        hi_t = np.where(np.isnan(hi_t), np.inf, hi_t)
        tmin = lo_t.max(axis=1)
        tmax = hi_t.min(axis=1)
        axis_in = lo_t.argmax(axis=1)
        axis_out = hi_t.argmin(axis=1)

        inside = tmin <= _EPS
        t = np.where(inside, tmax, tmin)
        axis = np.where(inside, axis_out, axis_in)
        hit = (tmax >= tmin) & (t > _EPS)

        n = np.zeros_like(dirs)
        rows = np.arange(dirs.shape[0])
        n[rows, axis] = -np.sign(dirs[rows, axis])
        t = np.where(hit, t, np.inf)
        return t, n

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        c = 0.5 * (self.lo + self.hi)
        h = 0.5 * (self.hi - self.lo)
        q = np.abs(points - c) - h
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return np.abs(outside + inside)

    def nearest_mirror_plane(self, point: np.ndarray):
        c = 0.5 * (self.lo + self.hi)
        best, best_d = None, np.inf
        for axis in range(3):
            for sign, bound in ((-1.0, self.lo[axis]), (1.0, self.hi[axis])):
                d = abs(point[axis] - bound)
                if d < best_d:
                    n = np.zeros(3)
                    n[axis] = sign
                    p0 = c.copy()
                    p0[axis] = bound
                    best, best_d = (p0, n), d
        return best

    def bounds(self):
        return self.lo.copy(), self.hi.copy()


@dataclass(frozen=True)
class Cylinder:
    """Finite cylinder between two axis endpoints; open-ended unless capped."""

    p0: np.ndarray
    p1: np.ndarray
    radius: float
    capped: bool = False
    material: Material = field(default_factory=Material)

    def __post_init__(self):
        p0 = np.asarray(self.p0, dtype=float).reshape(3)
        p1 = np.asarray(self.p1, dtype=float).reshape(3)
        if self.radius <= 0:
            raise ValueError("cylinder radius must be positive")
        if np.linalg.norm(p1 - p0) < _EPS:
            raise ValueError("cylinder axis endpoints coincide")
        p0.setflags(write=False)
        p1.setflags(write=False)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)

    def _axis(self):
        a = self.p1 - self.p0
        length = float(np.linalg.norm(a))
        return a / length, length

    def intersect(self, origin: np.ndarray, dirs: np.ndarray):
        a, length = self._axis()
        m = origin - self.p0
        md = float(m @ a)
        dd = dirs @ a
        m_perp = m - md * a
        d_perp = dirs - dd[:, None] * a

        A = np.einsum("ij,ij->i", d_perp, d_perp)
        B = 2.0 * d_perp @ m_perp
        C = float(m_perp @ m_perp) - self.radius**2

        t_best = np.full(dirs.shape[0], np.inf)
        n_best = np.zeros_like(dirs)

        with np.errstate(divide="ignore", invalid="ignore"):
            disc = B * B - 4.0 * A * C
            sq = np.sqrt(np.maximum(disc, 0.0))
            for sgn in (-1.0, 1.0):
                t = (-B + sgn * sq) / (2.0 * A)
                s_ax = md + t * dd
                ok = (disc >= 0) & (A > _EPS) & (t > _EPS) & (s_ax >= 0) & (s_ax <= length) & (t < t_best)
                if np.any(ok):
                    p = origin + t[ok, None] * dirs[ok]
                    radial = p - (self.p0 + s_ax[ok, None] * a)
                    n = radial / self.radius
                    flip = np.einsum("ij,ij->i", n, dirs[ok]) > 0
                    n[flip] *= -1.0
                    t_best[ok] = t[ok]
                    n_best[ok] = n

        if self.capped:
            for s_plane, outward in ((0.0, -a), (length, a)):
                with np.errstate(divide="ignore", invalid="ignore"):
                    t = (s_plane - md) / dd
                p = origin + t[:, None] * dirs
                radial2 = np.einsum("ij,ij->i", p - (self.p0 + s_plane * a), p - (self.p0 + s_plane * a)) - (md + t * dd - s_plane) ** 2
                ok = np.isfinite(t) & (t > _EPS) & (radial2 <= self.radius**2) & (t < t_best)
                if np.any(ok):
                    n = np.tile(outward, (int(ok.sum()), 1))
                    flip = np.einsum("ij,ij->i", n, dirs[ok]) > 0
                    n[flip] *= -1.0
                    t_best[ok] = t[ok]
                    n_best[ok] = n
        return t_best, n_best

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        a, length = self._axis()
        rel = points - self.p0
        s_ax = rel @ a
        radial = rel - s_ax[:, None] * a
        rho = np.linalg.norm(radial, axis=1)
        ax_out = np.maximum.reduce([-s_ax, s_ax - length, np.zeros_like(s_ax)])
        d_lateral = np.where(ax_out > 0, np.hypot(ax_out, rho - self.radius), np.abs(rho - self.radius))
        if not self.capped:
            return d_lateral
        d_caps = np.minimum(
            np.where(rho <= self.radius, np.abs(s_ax), np.hypot(np.abs(s_ax), rho - self.radius)),
            np.where(rho <= self.radius, np.abs(s_ax - length), np.hypot(np.abs(s_ax - length), rho - self.radius)),
        )
        return np.minimum(d_lateral, d_caps)

    def nearest_mirror_plane(self, point: np.ndarray):
        # Tangent plane at the closest lateral-surface point
        a, length = self._axis()
        rel = point - self.p0
        s_ax = min(max(float(rel @ a), 0.0), length)
        radial = rel - (rel @ a) * a
        rho = float(np.linalg.norm(radial))
        if rho < _EPS:
            return None
        n = radial / rho
        p0 = self.p0 + s_ax * a + self.radius * n
        return p0, n

    def bounds(self):
        a, _ = self._axis()
        pad = self.radius * np.sqrt(np.maximum(1.0 - a * a, 0.0))
        lo = np.minimum(self.p0, self.p1) - pad
        hi = np.maximum(self.p0, self.p1) + pad
        return lo, hi


@dataclass(frozen=True)
class TriangleSet:
    """Triangle soup: vertices (V, 3) and integer faces (F, 3)."""

    vertices: np.ndarray
    faces: np.ndarray
    material: Material = field(default_factory=Material)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=int).reshape(-1, 3)
        if f.size == 0:
            raise ValueError("triangle set has no faces")
        if f.min() < 0 or f.max() >= v.shape[0]:
            raise ValueError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def _corners(self):
        v = self.vertices
        f = self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def intersect(self, origin: np.ndarray, dirs: np.ndarray):
        n_rays = dirs.shape[0]
        t_best = np.full(n_rays, np.inf)
        n_best = np.zeros_like(dirs)
        a, b, c = self._corners()
        for k in range(self.faces.shape[0]):
            e1 = b[k] - a[k]
            e2 = c[k] - a[k]
            pvec = np.cross(dirs, e2)
            det = pvec @ e1
            with np.errstate(divide="ignore", invalid="ignore"):
                inv_det = 1.0 / det
                tvec = origin - a[k]
                u = (pvec @ tvec) * inv_det
                qvec = np.cross(tvec, e1)
                v = (dirs @ qvec) * inv_det
                t = float(e2 @ qvec) * inv_det
            ok = (
                (np.abs(det) > _EPS)
                & (u >= -1e-12)
                & (v >= -1e-12)
                & (u + v <= 1.0 + 1e-12)
                & (t > _EPS)
                & (t < t_best)
            )
            if np.any(ok):
                n = np.cross(e1, e2)
                n = n / np.linalg.norm(n)
                nk = np.tile(n, (int(ok.sum()), 1))
                flip = np.einsum("ij,ij->i", nk, dirs[ok]) > 0
                nk[flip] *= -1.0
                t_best[ok] = t[ok]
                n_best[ok] = nk
        return t_best, n_best

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        best = np.full(points.shape[0], np.inf)
        a, b, c = self._corners()
        for k in range(self.faces.shape[0]):
            best = np.minimum(best, _point_triangle_distance(points, a[k], b[k], c[k]))
        return best

    def nearest_mirror_plane(self, point: np.ndarray):
        a, b, c = self._corners()
        d = _point_triangle_distance(point.reshape(1, 3).repeat(self.faces.shape[0], axis=0), a, b, c, batched=True)
        k = int(np.argmin(d))
        n = np.cross(b[k] - a[k], c[k] - a[k])
        n = n / np.linalg.norm(n)
        side = float((point - a[k]) @ n)
        if side < 0:
            n = -n
        return a[k], n

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def _point_triangle_distance(p, a, b, c, batched=False):
    """Unsigned distance from points p to triangle(s) abc.

    With batched=True, a/b/c are (N, 3) matched row-wise to p.
    """
    if not batched:
        a = np.broadcast_to(a, p.shape)
        b = np.broadcast_to(b, p.shape)
        c = np.broadcast_to(c, p.shape)
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    nearest = np.empty_like(p)

    # Vertex regions
    mask_a = (d1 <= 0) & (d2 <= 0)
    mask_b = (d3 >= 0) & (d4 <= d3)
    mask_c = (d6 >= 0) & (d5 <= d6)
    nearest[mask_a] = a[mask_a]
    nearest[mask_b] = b[mask_b]
    nearest[mask_c] = c[mask_c]

    done = mask_a | mask_b | mask_c

    vc = d1 * d4 - d3 * d2
    mask_ab = ~done & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = d1 / (d1 - d3)
    nearest[mask_ab] = a[mask_ab] + w[mask_ab, None] * ab[mask_ab]
    done |= mask_ab

    vb = d5 * d2 - d1 * d6
    mask_ac = ~done & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = d2 / (d2 - d6)
    nearest[mask_ac] = a[mask_ac] + w[mask_ac, None] * ac[mask_ac]
    done |= mask_ac

    va = d3 * d6 - d5 * d4
    mask_bc = ~done & (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    nearest[mask_bc] = b[mask_bc] + w[mask_bc, None] * (c[mask_bc] - b[mask_bc])
    done |= mask_bc

    inner = ~done
    if np.any(inner):
        denom = va + vb + vc
        with np.errstate(invalid="ignore", divide="ignore"):
            v = vb / denom
            w = vc / denom
        nearest[inner] = a[inner] + v[inner, None] * ab[inner] + w[inner, None] * ac[inner]

    return np.linalg.norm(p - nearest, axis=1)


Surface = Box | Cylinder | TriangleSet


@dataclass(frozen=True)
class Environment:
    """A collection of solid surfaces.

    An empty environment is valid (every scan comes back empty), so degenerate
    scenarios still run end to end.
    """

    surfaces: tuple

    def __init__(self, surfaces: Sequence[Surface]):
        object.__setattr__(self, "surfaces", tuple(surfaces))

    def raycast(self, origin: np.ndarray, dirs: np.ndarray):
        """Nearest hit per ray: (ranges, normals, surface indices).

        Misses carry range inf and surface index -1.
        """
        n_rays = dirs.shape[0]
        t = np.full(n_rays, np.inf)
        normals = np.zeros((n_rays, 3))
        idx = np.full(n_rays, -1, dtype=int)
        for k, surf in enumerate(self.surfaces):
            tk, nk = surf.intersect(origin, dirs)
            closer = tk < t
            t[closer] = tk[closer]
            normals[closer] = nk[closer]
            idx[closer] = k
        return t, normals, idx

    def surface_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest surface."""
        if points.shape[0] == 0:
            return np.zeros(0)
        best = np.full(points.shape[0], np.inf)
        for surf in self.surfaces:
            best = np.minimum(best, surf.surface_distance(points))
        return best

    def mirror_surfaces(self):
        return [s for s in self.surfaces if s.material.mirror_gain > 0.0]

    def bounds(self):
        if not self.surfaces:
            return np.zeros(3), np.zeros(3)
        los, his = zip(*(s.bounds() for s in self.surfaces))
        return np.min(los, axis=0), np.max(his, axis=0)

    def dominant_dimension(self) -> float:
        if not self.surfaces:
            return 0.0
        lo, hi = self.bounds()
        return float(np.max(hi - lo))
