"""Voxel-hashed local map and voxel grid downsampling."""

from __future__ import annotations

import numpy as np


def voxel_downsample(points: np.ndarray, voxel: float) -> np.ndarray:
    """Keep the first-inserted point per voxel; deterministic in input order."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        return pts.copy()
    keys = np.floor(pts / voxel).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(first)]


class VoxelHashMap:
    """World-frame point map bucketed into voxels with a per-voxel cap.

    Keeps at most `max_points_per_voxel` points per cell and only points
    within `max_range` of the most recent insertion origin.
    """

    def __init__(self, voxel_size: float = 0.2, max_points_per_voxel: int = 20, max_range: float = 20.0):
        if voxel_size <= 0 or max_points_per_voxel <= 0 or max_range <= 0:
            raise ValueError("voxel map parameters must be positive")
        self.voxel_size = voxel_size
        self.max_points_per_voxel = max_points_per_voxel
        self.max_range = max_range
        self._cells: dict[tuple[int, int, int], list[np.ndarray]] = {}
        self._n_points = 0

    def __len__(self) -> int:
        return self._n_points

    @property
    def n_voxels(self) -> int:
        return len(self._cells)

    def insert(self, points: np.ndarray, origin: np.ndarray | None = None) -> None:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if origin is not None and pts.shape[0]:
            keep = np.linalg.norm(pts - origin, axis=1) <= self.max_range
            pts = pts[keep]
        if pts.shape[0] == 0:
            return
        keys = np.floor(pts / self.voxel_size).astype(np.int64)
        for p, k in zip(pts, map(tuple, keys)):
            bucket = self._cells.get(k)
            if bucket is None:
                self._cells[k] = [p]
                self._n_points += 1
            elif len(bucket) < self.max_points_per_voxel:
                bucket.append(p)
                self._n_points += 1

    def prune(self, origin: np.ndarray) -> None:
        """Drop voxels whose centers lie beyond max_range of origin."""
        if not self._cells:
            return
        keys = np.array(list(self._cells.keys()), dtype=np.int64)
        centers = (keys + 0.5) * self.voxel_size
        far = np.linalg.norm(centers - origin, axis=1) > self.max_range + self.voxel_size
        for k in keys[far]:
            self._n_points -= len(self._cells.pop(tuple(k)))

    def point_array(self) -> np.ndarray:
        if not self._cells:
            return np.zeros((0, 3))
        return np.array([p for bucket in self._cells.values() for p in bucket])
