"""Voxelized region of interest, oriented boxes and box-to-voxel enumeration.

World frame is ego-centered: x forward, y left, z up, meters.
Voxel linear index is ``iz * (nx * ny) + iy * nx + ix`` (x fastest).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

_DIVISIBILITY_RTOL = 1e-9


class GeometryError(ValueError):
    pass


class Point3(NamedTuple):
    x: float
    y: float
    z: float


class VoxelIndex(NamedTuple):
    ix: int
    iy: int
    iz: int


def wrap_angle(a: float) -> float:
    """Normalize an angle to [-pi, pi)."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w < 0.0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True)
class RoiGrid:
    origin: Point3
    length: float
    width: float
    height: float
    resolution: float
    nx: int
    ny: int
    nz: int

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.origin, dtype=np.float64)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + np.array([self.length, self.width, self.height])

    def linear_index(self, v: VoxelIndex) -> int:
        return v.iz * (self.nx * self.ny) + v.iy * self.nx + v.ix

    def unravel(self, i: int) -> VoxelIndex:
        ix = i % self.nx
        iy = (i // self.nx) % self.ny
        iz = i // (self.nx * self.ny)
        return VoxelIndex(int(ix), int(iy), int(iz))


def make_grid(origin, length: float, width: float, height: float, resolution: float) -> RoiGrid:
    """Build a grid whose extents are exact multiples of ``resolution``."""
    origin = Point3(*(float(c) for c in origin))
    if not all(math.isfinite(c) for c in origin):
        raise GeometryError("origin must be finite")
    if not resolution > 0:
        raise GeometryError(f"resolution must be positive, got {resolution}")
    counts = []
    for name, extent in (("L", length), ("W", width), ("H", height)):
        if not extent > 0:
            raise GeometryError(f"{name} must be positive, got {extent}")
        q = extent / resolution
        n = round(q)
        if n < 1 or abs(q - n) > _DIVISIBILITY_RTOL * max(abs(q), 1.0):
            raise GeometryError(f"{name} not divisible by δ ({extent} / {resolution} = {q})")
        counts.append(int(n))
    return RoiGrid(origin, float(length), float(width), float(height), float(resolution), *counts)


def voxel_index(p, grid: RoiGrid) -> Optional[VoxelIndex]:
    """Voxel containing ``p`` under half-open cells, or None when outside."""
    idx = []
    for c, o, n in zip(p, grid.origin, grid.shape):
        k = math.floor((c - o) / grid.resolution)
        if not 0 <= k < n:
            return None
        idx.append(k)
    return VoxelIndex(*idx)


def voxel_indices(points: np.ndarray, grid: RoiGrid) -> np.ndarray:
    """Vectorized :func:`voxel_index`: linear indices, -1 for outside points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    k = np.floor((pts - grid.lower) / grid.resolution)
    shape = np.array(grid.shape)
    inside = np.all((k >= 0) & (k < shape), axis=1)
    k = np.where(inside[:, None], k, 0).astype(np.int64)
    lin = k[:, 2] * (grid.nx * grid.ny) + k[:, 1] * grid.nx + k[:, 0]
    return np.where(inside, lin, -1)


def voxel_center(v: VoxelIndex, grid: RoiGrid) -> Point3:
    for k, n in zip(v, grid.shape):
        if not 0 <= k < n:
            raise GeometryError(f"voxel {tuple(v)} outside grid of shape {grid.shape}")
    return Point3(*((o + (k + 0.5) * grid.resolution) for o, k in zip(grid.origin, v)))


@dataclass(frozen=True)
class OrientedBox:
    center: Point3
    size: tuple[float, float, float]
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "center", Point3(*(float(c) for c in self.center)))
        size = tuple(float(s) for s in self.size)
        if len(size) != 3 or not all(s > 0 for s in size):
            raise GeometryError(f"box size must be three positive lengths, got {self.size}")
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        l, w, h = self.size
        c, s = abs(math.cos(self.yaw)), abs(math.sin(self.yaw))
        half = np.array([(l * c + w * s) / 2, (l * s + w * c) / 2, h / 2])
        ctr = np.array(self.center)
        return ctr - half, ctr + half


def _contains(box: OrientedBox, pts: np.ndarray) -> np.ndarray:
    d = pts - np.array(box.center)
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    u = c * d[..., 0] + s * d[..., 1]
    v = -s * d[..., 0] + c * d[..., 1]
    l, w, h = box.size
    return (np.abs(u) <= l / 2) & (np.abs(v) <= w / 2) & (np.abs(d[..., 2]) <= h / 2)


def point_in_obb(p, box: OrientedBox) -> bool:
    """Face-inclusive containment of ``p`` in the yaw-rotated box."""
    return bool(_contains(box, np.asarray(p, dtype=np.float64)))


def box_voxel_indices(box: OrientedBox, grid: RoiGrid) -> np.ndarray:
    """Sorted linear indices of voxels whose centers lie inside ``box``."""
    lo, hi = box.aabb()
    d = grid.resolution
    # center of voxel k is origin + (k + 0.5) * d; one cell of slack, exact test below
    kmin = np.ceil((lo - grid.lower) / d - 0.5).astype(np.int64) - 1
    kmax = np.floor((hi - grid.lower) / d - 0.5).astype(np.int64) + 1
    kmin = np.maximum(kmin, 0)
    kmax = np.minimum(kmax, np.array(grid.shape) - 1)
    if np.any(kmax < kmin):
        return np.empty(0, dtype=np.int64)
    ix, iy, iz = (np.arange(a, b + 1) for a, b in zip(kmin, kmax))
    gz, gy, gx = np.meshgrid(iz, iy, ix, indexing="ij")
    centers = np.stack([gx, gy, gz], axis=-1) * d + grid.lower + 0.5 * d
    inside = _contains(box, centers)
    lin = gz * (grid.nx * grid.ny) + gy * grid.nx + gx
    return lin[inside].astype(np.int64)


def voxels_in_box(box: OrientedBox, grid: RoiGrid) -> set[VoxelIndex]:
    return {grid.unravel(int(i)) for i in box_voxel_indices(box, grid)}


def all_voxel_centers(grid: RoiGrid) -> np.ndarray:
    """(N, 3) voxel centers in linear-index order."""
    d = grid.resolution
    gz, gy, gx = np.meshgrid(np.arange(grid.nz), np.arange(grid.ny), np.arange(grid.nx), indexing="ij")
    return (np.stack([gx, gy, gz], axis=-1).reshape(-1, 3) + 0.5) * d + grid.lower
