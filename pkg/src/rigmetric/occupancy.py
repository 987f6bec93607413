"""Probabilistic occupancy grids and the information-gain surrogate metrics.

A voxel traversed by at least one ray of a modality counts as observed and
keeps no residual entropy; unobserved voxels keep their prior binary entropy.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Point3, RoiGrid, box_voxel_indices, make_grid
from .traversal import CoverageSet

LOG_BASES = {"e": math.e, "2": 2.0}


class MetricError(ValueError):
    pass


def _log_scale(log_base) -> float:
    base = LOG_BASES.get(str(log_base), log_base)
    try:
        base = float(base)
    except (TypeError, ValueError):
        raise MetricError(f"unsupported log base {log_base!r}") from None
    if not base > 1:
        raise MetricError(f"log base must be > 1, got {log_base!r}")
    return 1.0 / math.log(base)


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    grid: RoiGrid
    class_label: str
    frame_count: int
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.shape != (self.grid.n_voxels,):
            raise MetricError(f"counts has shape {c.shape}, expected ({self.grid.n_voxels},)")
        if self.frame_count < 1:
            raise MetricError("an occupancy grid needs at least one frame")
        c = c.astype(np.uint32)
        if c.size and int(c.max()) > self.frame_count:
            raise MetricError("voxel count exceeds frame count")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.frame_count

    def merge(self, other: "OccupancyGrid") -> "OccupancyGrid":
        """Combine grids built from disjoint frame batches."""
        if self.grid != other.grid or self.class_label != other.class_label:
            raise MetricError("can only merge grids of the same geometry and class")
        return OccupancyGrid(
            self.grid,
            self.class_label,
            self.frame_count + other.frame_count,
            self.counts.astype(np.int64) + other.counts,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.class_label == other.class_label
            and self.frame_count == other.frame_count
            and np.array_equal(self.counts, other.counts)
        )


def _frame_counts(frames, grid: RoiGrid, class_label: str) -> np.ndarray:
    counts = np.zeros(grid.n_voxels, dtype=np.int64)
    occupied = np.zeros(grid.n_voxels, dtype=bool)
    for frame in frames:
        occupied[:] = False
        for label, box in frame.boxes:
            if label == class_label:
                occupied[box_voxel_indices(box, grid)] = True
        # one indicator per frame, however many boxes overlap the voxel
        counts += occupied
    return counts


def build_pog(dataset, grid: RoiGrid, class_label: str, workers: int = 1) -> OccupancyGrid:
    """Per-voxel fraction of frames in which a ``class_label`` box holds the voxel center."""
    frames = list(dataset.frames)
    if not frames:
        raise MetricError("cannot build an occupancy grid from an empty dataset")
    if workers <= 1 or len(frames) < 2:
        counts = _frame_counts(frames, grid, class_label)
    else:
        size = -(-len(frames) // workers)
        batches = [frames[i : i + size] for i in range(0, len(frames), size)]
        counts = np.zeros(grid.n_voxels, dtype=np.int64)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for c in pool.map(lambda b: _frame_counts(b, grid, class_label), batches):
                counts += c
    return OccupancyGrid(grid, class_label, len(frames), counts)


def binary_entropy(p, log_base="e"):
    """Bernoulli entropy with ``0 log 0 = 0``; scalar in, scalar out."""
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~((arr >= 0) & (arr <= 1))):
        raise MetricError("probability outside [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(arr * np.log(arr)) - (1 - arr) * np.log1p(-arr)
    h = np.where((arr == 0) | (arr == 1), 0.0, h) * _log_scale(log_base)
    return float(h) if h.ndim == 0 else h


def _entropy_sum(pog: OccupancyGrid, keep: np.ndarray | None, log_base) -> float:
    counts = pog.counts if keep is None else pog.counts[keep]
    # p in {0, 1} contributes nothing; entropies depend only on the count value
    values, mult = np.unique(counts, return_counts=True)
    h = binary_entropy(values / pog.frame_count, log_base)
    return math.fsum(np.atleast_1d(h * mult).tolist())


def total_entropy(pog: OccupancyGrid, log_base="e") -> float:
    return _entropy_sum(pog, None, log_base)


def _check_grid(pog: OccupancyGrid, cov: CoverageSet):
    if pog.grid != cov.grid:
        raise MetricError("coverage set and occupancy grid use different grids")


def conditional_entropy(pog: OccupancyGrid, cov: CoverageSet, log_base="e") -> float:
    """Entropy left in the voxels that no ray traverses."""
    _check_grid(pog, cov)
    return _entropy_sum(pog, ~cov.mask, log_base)


def s_mig(pog: OccupancyGrid, cov: CoverageSet, log_base="e") -> float:
    return -conditional_entropy(pog, cov, log_base)


def information_gain(pog: OccupancyGrid, cov: CoverageSet, log_base="e") -> float:
    return total_entropy(pog, log_base) - conditional_entropy(pog, cov, log_base)


def s_ms(camera_s_mig: float, lidar_s_mig: float, lam: float) -> float:
    """Camera and LiDAR S-MIG combined with camera weight ``lam``."""
    if not lam >= 0:
        raise MetricError(f"lambda must be non-negative, got {lam}")
    return lam * camera_s_mig + lidar_s_mig


@dataclass(frozen=True)
class ModalityMetric:
    total_entropy: float
    conditional_entropy: float
    information_gain: float
    s_mig: float


@dataclass(frozen=True)
class FusionMetric:
    lam: float
    camera: ModalityMetric
    lidar: ModalityMetric
    s_ms: float


def modality_metric(pog: OccupancyGrid, cov: CoverageSet, log_base="e") -> ModalityMetric:
    h = total_entropy(pog, log_base)
    cond = conditional_entropy(pog, cov, log_base)
    return ModalityMetric(h, cond, h - cond, -cond)


def fusion_metric(pog: OccupancyGrid, camera_cov: CoverageSet, lidar_cov: CoverageSet, lam: float, log_base="e"):
    cam = modality_metric(pog, camera_cov, log_base)
    lid = modality_metric(pog, lidar_cov, log_base)
    return FusionMetric(lam, cam, lid, s_ms(cam.s_mig, lid.s_mig, lam))


# POG file layout (all fields in the byte order named by the tag):
#   magic    4s   b"POG1"
#   endian   1s   b"<" or b">"
#   origin   3d   minimum corner, meters
#   extents  3d   L, W, H, meters
#   delta    d    resolution, meters
#   shape    3I   nx, ny, nz
#   frames   I    T
#   label_n  H    byte length of the UTF-8 class label
#   label    label_n bytes
#   counts   N x uint32, linear-index order (x fastest)
_POG_MAGIC = b"POG1"


def save_pog(pog: OccupancyGrid, path, byteorder: str = "<") -> None:
    if byteorder not in ("<", ">"):
        raise ValueError("byteorder must be '<' or '>'")
    g = pog.grid
    label = pog.class_label.encode("utf-8")
    header = _POG_MAGIC + byteorder.encode() + struct.pack(
        f"{byteorder}3d3dd3IIH", *g.origin, g.length, g.width, g.height, g.resolution, *g.shape, pog.frame_count, len(label)
    )
    body = pog.counts.astype(np.dtype(np.uint32).newbyteorder(byteorder)).tobytes()
    Path(path).write_bytes(header + label + body)


def load_pog(path) -> OccupancyGrid:
    data = Path(path).read_bytes()
    if data[:4] != _POG_MAGIC:
        raise MetricError(f"{path}: not an occupancy grid file")
    bo = data[4:5].decode()
    if bo not in ("<", ">"):
        raise MetricError(f"{path}: bad endianness tag {bo!r}")
    fmt = f"{bo}3d3dd3IIH"
    off = 5 + struct.calcsize(fmt)
    vals = struct.unpack(fmt, data[5:off])
    origin, extents, delta = vals[0:3], vals[3:6], vals[6]
    nx, ny, nz, frames, label_n = vals[7:]
    label = data[off : off + label_n].decode("utf-8")
    grid = make_grid(Point3(*origin), *extents, delta)
    if grid.shape != (nx, ny, nz):
        raise MetricError(f"{path}: grid shape does not match extents")
    counts = np.frombuffer(data, dtype=np.dtype(np.uint32).newbyteorder(bo), count=grid.n_voxels, offset=off + label_n)
    return OccupancyGrid(grid, label, frames, counts)
