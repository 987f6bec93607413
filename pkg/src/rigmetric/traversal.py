"""Voxel traversal of rays through the ROI and per-modality coverage sets.

Traversal is the parametric incremental (Amanatides-Woo style) generalization
of Bresenham line voxelization: the ray is clipped to the ROI box for t >= 0,
then steps one voxel per boundary crossing. Simultaneous crossings are
resolved x, then y, then z. Rays are never terminated by objects.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .geometry import RoiGrid, VoxelIndex
from .sensors import RaySet

_CHUNK = 4096


@numba.njit(cache=True, nogil=True)
def _traverse(o, d, lo, shape, delta, out):
    """Write linear indices of traversed voxels into ``out``; return the count."""
    t0 = 0.0
    t1 = np.inf
    for a in range(3):
        hi = lo[a] + shape[a] * delta
        if d[a] == 0.0:
            if o[a] < lo[a] or o[a] >= hi:
                return 0
        else:
            ta = (lo[a] - o[a]) / d[a]
            tb = (hi - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    if t0 >= t1:
        return 0

    k = np.empty(3, np.int64)
    step = np.empty(3, np.int64)
    tmax = np.empty(3, np.float64)
    tdelta = np.empty(3, np.float64)
    for a in range(3):
        p = o[a] + t0 * d[a]
        ka = int(np.floor((p - lo[a]) / delta))
        if ka < 0:
            ka = 0
        elif ka >= shape[a]:
            ka = shape[a] - 1
        k[a] = ka
        if d[a] > 0.0:
            step[a] = 1
            tmax[a] = (lo[a] + (ka + 1) * delta - o[a]) / d[a]
            tdelta[a] = delta / d[a]
        elif d[a] < 0.0:
            step[a] = -1
            tmax[a] = (lo[a] + ka * delta - o[a]) / d[a]
            tdelta[a] = -delta / d[a]
        else:
            step[a] = 0
            tmax[a] = np.inf
            tdelta[a] = np.inf

    nxy = shape[0] * shape[1]
    n = 0
    while True:
        out[n] = k[2] * nxy + k[1] * shape[0] + k[0]
        n += 1
        if tmax[0] <= tmax[1] and tmax[0] <= tmax[2]:
            a = 0
        elif tmax[1] <= tmax[2]:
            a = 1
        else:
            a = 2
        if tmax[a] >= t1:
            break
        k[a] += step[a]
        if k[a] < 0 or k[a] >= shape[a]:
            break
        tmax[a] += tdelta[a]
    return n


@numba.njit(cache=True, nogil=True)
def _mark(origins, directions, lo, shape, delta, mask):
    buf = np.empty(shape[0] + shape[1] + shape[2] + 3, np.int64)
    for r in range(origins.shape[0]):
        n = _traverse(origins[r], directions[r], lo, shape, delta, buf)
        for i in range(n):
            mask[buf[i]] = True


def _grid_args(grid: RoiGrid):
    return grid.lower, np.array(grid.shape, dtype=np.int64), float(grid.resolution)


def traverse_linear(origin, direction, grid: RoiGrid) -> np.ndarray:
    lo, shape, delta = _grid_args(grid)
    buf = np.empty(int(shape.sum()) + 3, np.int64)
    n = _traverse(
        np.asarray(origin, dtype=np.float64), np.asarray(direction, dtype=np.float64), lo, shape, delta, buf
    )
    return buf[:n].copy()


def traverse(ray, grid: RoiGrid) -> list[VoxelIndex]:
    """Voxels pierced by ``ray`` inside the ROI, in travel order."""
    return [grid.unravel(int(i)) for i in traverse_linear(ray.origin, ray.direction, grid)]


@dataclass(frozen=True, eq=False)
class CoverageSet:
    """Voxels traversed by at least one ray; ``mask`` is a dense N-bit set."""

    grid: RoiGrid
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.grid.n_voxels,):
            raise ValueError(f"mask has shape {m.shape}, expected ({self.grid.n_voxels},)")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)

    @classmethod
    def empty(cls, grid: RoiGrid) -> "CoverageSet":
        return cls(grid, np.zeros(grid.n_voxels, dtype=bool))

    @classmethod
    def full(cls, grid: RoiGrid) -> "CoverageSet":
        return cls(grid, np.ones(grid.n_voxels, dtype=bool))

    @classmethod
    def from_indices(cls, grid: RoiGrid, indices) -> "CoverageSet":
        m = np.zeros(grid.n_voxels, dtype=bool)
        m[np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices, dtype=np.int64)] = True
        return cls(grid, m)

    def __len__(self) -> int:
        return int(np.count_nonzero(self.mask))

    def __contains__(self, v) -> bool:
        i = self.grid.linear_index(v) if isinstance(v, tuple) else int(v)
        return bool(self.mask[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoverageSet):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.mask, other.mask)

    def __or__(self, other: "CoverageSet") -> "CoverageSet":
        self._check(other)
        return CoverageSet(self.grid, self.mask | other.mask)

    def __le__(self, other: "CoverageSet") -> bool:
        self._check(other)
        return not np.any(self.mask & ~other.mask)

    def _check(self, other: "CoverageSet"):
        if self.grid != other.grid:
            raise ValueError("coverage sets built on different grids")

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def voxels(self) -> set[VoxelIndex]:
        return {self.grid.unravel(int(i)) for i in self.indices()}

    def to_bytes(self) -> bytes:
        """N bits in linear-index order, packed LSB-first into little-endian 64-bit words."""
        n = self.grid.n_voxels
        padded = np.zeros(-(-n // 64) * 64, dtype=bool)
        padded[:n] = self.mask
        return np.packbits(padded, bitorder="little").tobytes()

    @classmethod
    def from_bytes(cls, grid: RoiGrid, data: bytes) -> "CoverageSet":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")
        if len(bits) < grid.n_voxels:
            raise ValueError("bitmask shorter than the grid")
        return cls(grid, bits[: grid.n_voxels].astype(bool))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())


def coverage(rays: RaySet, grid: RoiGrid, workers: int | None = 1) -> CoverageSet:
    """Union of :func:`traverse` over ``rays``.

    Rays are split into fixed-size chunks; each chunk fills a private mask and
    the masks are OR-merged, so the result does not depend on ``workers``.
    """
    if not isinstance(rays, RaySet):
        rays = RaySet.from_rays(rays)
    lo, shape, delta = _grid_args(grid)
    n = len(rays)
    if workers is None or workers < 1:
        workers = os.cpu_count() or 1

    def run(start: int) -> np.ndarray:
        m = np.zeros(grid.n_voxels, dtype=bool)
        _mark(rays.origins[start : start + _CHUNK], rays.directions[start : start + _CHUNK], lo, shape, delta, m)
        return m

    starts = range(0, n, _CHUNK)
    mask = np.zeros(grid.n_voxels, dtype=bool)
    if workers == 1 or n <= _CHUNK:
        for s in starts:
            mask |= run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for m in pool.map(run, starts):
                mask |= m
    return CoverageSet(grid, mask)
