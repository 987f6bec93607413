"""Annotated frame datasets: line-delimited JSON ingestion and synthetic scenes.

Frame file: UTF-8, one JSON object per line::

    {"frame_id": "f000", "boxes": [{"class": "Car", "center": [x, y, z],
                                    "size": [l, w, h], "yaw": 0.0}]}

Blank lines are skipped. Units are meters and radians.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .geometry import GeometryError, OrientedBox, Point3, RoiGrid, voxel_index

DEFAULT_CLASSES = ("Car", "Bicycle", "Pedestrian")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Frame:
    frame_id: str
    boxes: tuple[tuple[str, OrientedBox], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "boxes", tuple((str(c), b) for c, b in self.boxes))


@dataclass(frozen=True)
class Dataset:
    frames: tuple[Frame, ...]
    classes: tuple[str, ...] = DEFAULT_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.frames:
            raise DatasetError("a dataset needs at least one frame")
        seen = set()
        for f in self.frames:
            if f.frame_id in seen:
                raise DatasetError(f"duplicate frame_id {f.frame_id!r}")
            seen.add(f.frame_id)
            for label, _ in f.boxes:
                if label not in self.classes:
                    raise DatasetError(f"frame {f.frame_id!r}: unknown class {label!r}, allowed: {list(self.classes)}")

    @property
    def T(self) -> int:
        return len(self.frames)

    def box_totals(self) -> dict[str, int]:
        totals = dict.fromkeys(self.classes, 0)
        for f in self.frames:
            for label, _ in f.boxes:
                totals[label] += 1
        return totals


def _vec3(rec: dict, key: str, where: str) -> tuple[float, float, float]:
    if key not in rec:
        raise DatasetError(f"{where}: missing field {key!r}")
    v = rec[key]
    if not isinstance(v, list) or len(v) != 3 or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v):
        raise DatasetError(f"{where}: field {key!r} must be a list of 3 numbers")
    if not all(math.isfinite(c) for c in v):
        raise DatasetError(f"{where}: field {key!r} must be finite")
    return tuple(float(c) for c in v)


def _parse_box(rec, where: str, classes) -> tuple[str, OrientedBox]:
    if not isinstance(rec, dict):
        raise DatasetError(f"{where}: box must be an object")
    if "class" not in rec:
        raise DatasetError(f"{where}: missing field 'class'")
    label = rec["class"]
    if label not in classes:
        raise DatasetError(f"{where}: unknown class {label!r}, allowed: {list(classes)}")
    center = _vec3(rec, "center", where)
    size = _vec3(rec, "size", where)
    if "yaw" not in rec:
        raise DatasetError(f"{where}: missing field 'yaw'")
    yaw = rec["yaw"]
    if not isinstance(yaw, (int, float)) or isinstance(yaw, bool) or not math.isfinite(yaw):
        raise DatasetError(f"{where}: field 'yaw' must be a finite number")
    try:
        return label, OrientedBox(Point3(*center), size, float(yaw))
    except GeometryError as e:
        raise DatasetError(f"{where}: field 'size': {e}") from None


def parse_frames(lines: Iterable[str], classes=DEFAULT_CLASSES, source: str = "<frames>") -> Dataset:
    frames = []
    seen = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        where = f"{source}:{lineno}"
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise DatasetError(f"{where}: invalid JSON ({e.msg})") from None
        if not isinstance(rec, dict):
            raise DatasetError(f"{where}: record must be an object")
        if "frame_id" not in rec:
            raise DatasetError(f"{where}: missing field 'frame_id'")
        fid = str(rec["frame_id"])
        if fid in seen:
            raise DatasetError(f"{where}: duplicate frame_id {fid!r}")
        seen.add(fid)
        boxes = rec.get("boxes")
        if not isinstance(boxes, list):
            raise DatasetError(f"{where}: missing field 'boxes'")
        frames.append(Frame(fid, tuple(_parse_box(b, f"{where}: boxes[{i}]", classes) for i, b in enumerate(boxes))))
    if not frames:
        raise DatasetError(f"{source}: no frames")
    return Dataset(tuple(frames), tuple(classes))


def load_frames(path, classes=DEFAULT_CLASSES) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_frames(fh, classes, source=str(path))


def frame_record(frame: Frame) -> dict:
    return {
        "frame_id": frame.frame_id,
        "boxes": [
            {"class": label, "center": list(b.center), "size": list(b.size), "yaw": b.yaw}
            for label, b in frame.boxes
        ],
    }


def dumps_frames(ds: Dataset) -> str:
    return "".join(json.dumps(frame_record(f), separators=(",", ":")) + "\n" for f in ds.frames)


def write_frames(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_frames(ds))


def clip_to_roi(ds: Dataset, grid: RoiGrid) -> Dataset:
    """Drop boxes centered outside the ROI; emptied frames are kept."""
    frames = tuple(
        Frame(f.frame_id, tuple((c, b) for c, b in f.boxes if voxel_index(b.center, grid) is not None))
        for f in ds.frames
    )
    return Dataset(frames, ds.classes)


@dataclass(frozen=True)
class ClassSpec:
    count: tuple[int, int]
    length: tuple[float, float]
    width: tuple[float, float]
    height: tuple[float, float]


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for a seeded synthetic dataset.

    Boxes stand on the ground plane ``ground_z`` inside the rectangular
    placement band ``x_range`` x ``y_range``. With ``yaw_mode="lane"`` a box
    heads along +x or -x plus a uniform jitter of at most ``yaw_jitter``
    radians; ``"uniform"`` draws the heading over the full circle.
    """

    seed: int
    frames: int
    classes: dict[str, ClassSpec]
    x_range: tuple[float, float] = (-45.0, 45.0)
    y_range: tuple[float, float] = (-10.0, 10.0)
    ground_z: float = 0.0
    yaw_mode: str = "lane"
    yaw_jitter: float = 0.15

    def __post_init__(self):
        if self.frames < 1:
            raise DatasetError("scene needs at least one frame")
        if not 0 <= self.seed < 2**64:
            raise DatasetError("seed must be an unsigned 64-bit integer")
        if self.yaw_mode not in ("lane", "uniform"):
            raise DatasetError(f"yaw_mode must be 'lane' or 'uniform', got {self.yaw_mode!r}")
        ranges = [("x_range", self.x_range), ("y_range", self.y_range)]
        for label, cs in self.classes.items():
            if cs.count[0] < 0:
                raise DatasetError(f"{label}.count must be non-negative")
            ranges += [(f"{label}.{k}", getattr(cs, k)) for k in ("count", "length", "width", "height")]
        for name, (lo, hi) in ranges:
            if lo > hi:
                raise DatasetError(f"{name} is empty: [{lo}, {hi}]")
        for label, cs in self.classes.items():
            if cs.length[0] <= 0 or cs.width[0] <= 0 or cs.height[0] <= 0:
                raise DatasetError(f"{label}: box sizes must be positive")

    def check_inside(self, grid: RoiGrid) -> None:
        lo, hi = grid.lower, grid.upper
        if not (lo[0] <= self.x_range[0] and self.x_range[1] < hi[0] and lo[1] <= self.y_range[0] and self.y_range[1] < hi[1]):
            raise DatasetError("scene placement band is not inside the ROI")


def default_scene(seed: int = 0, frames: int = 200) -> SceneSpec:
    return SceneSpec(
        seed=seed,
        frames=frames,
        classes={
            "Car": ClassSpec((4, 12), (3.8, 5.0), (1.7, 2.1), (1.4, 1.9)),
            "Bicycle": ClassSpec((0, 4), (1.5, 1.9), (0.5, 0.8), (1.0, 1.4)),
            "Pedestrian": ClassSpec((1, 8), (0.5, 0.9), (0.5, 0.9), (1.5, 1.9)),
        },
    )


class _Uniforms:
    """U[0, 1) doubles from PCG64 raw 64-bit outputs: ``(x >> 11) * 2**-53``."""

    def __init__(self, seed: int):
        self._bits = np.random.PCG64(seed)

    def next(self) -> float:
        return float(int(self._bits.random_raw()) >> 11) * 2.0**-53

    def between(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.next()

    def integer(self, lo: int, hi: int) -> int:
        return lo + min(int(self.next() * (hi - lo + 1)), hi - lo)


def synth_scene(spec: SceneSpec) -> Dataset:
    """Deterministic dataset for ``spec``.

    Draw order, per frame and per class in ``spec.classes`` order: one draw
    for the box count, then per box x, y, length, width, height and the yaw
    draws (lane mode: heading bit then jitter; uniform mode: one draw).
    """
    rng = _Uniforms(spec.seed)
    width = len(str(spec.frames - 1))
    frames = []
    for t in range(spec.frames):
        boxes = []
        for label, cs in spec.classes.items():
            for _ in range(rng.integer(*cs.count)):
                x = rng.between(*spec.x_range)
                y = rng.between(*spec.y_range)
                l = rng.between(*cs.length)
                w = rng.between(*cs.width)
                h = rng.between(*cs.height)
                if spec.yaw_mode == "lane":
                    heading = 0.0 if rng.next() < 0.5 else math.pi
                    yaw = heading + spec.yaw_jitter * (2.0 * rng.next() - 1.0)
                else:
                    yaw = -math.pi + 2.0 * math.pi * rng.next()
                boxes.append((label, OrientedBox(Point3(x, y, spec.ground_z + h / 2), (l, w, h), yaw)))
        frames.append(Frame(f"synth-{t:0{width}d}", tuple(boxes)))
    return Dataset(tuple(frames), tuple(spec.classes))
