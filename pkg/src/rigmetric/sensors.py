"""LiDAR and camera ray-casting models.

Sensor mount frame matches the ego frame (x forward, y left, z up). A mount
pose rotates by yaw about z, then pitch (positive = nose up), then roll about
the forward axis, i.e. ``R = Rz(yaw) @ Ry(-pitch) @ Rx(roll)``.

Camera pixel coordinates follow the usual image convention (u right, v down,
optical axis forward).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .geometry import Point3, wrap_angle


class SensorConfigError(ValueError):
    pass


class Ray(NamedTuple):
    origin: Point3
    direction: tuple[float, float, float]
    yaw: float
    pitch: float


@dataclass(frozen=True, eq=False)
class RaySet:
    """Structure-of-arrays ray bundle; iterating yields :class:`Ray` items."""

    origins: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        o = np.ascontiguousarray(self.origins, dtype=np.float64).reshape(-1, 3)
        d = np.ascontiguousarray(self.directions, dtype=np.float64).reshape(-1, 3)
        if o.shape != d.shape:
            raise ValueError("origins and directions must have the same length")
        object.__setattr__(self, "origins", o)
        object.__setattr__(self, "directions", d)

    @classmethod
    def empty(cls) -> "RaySet":
        return cls(np.empty((0, 3)), np.empty((0, 3)))

    @classmethod
    def from_rays(cls, rays) -> "RaySet":
        rays = list(rays)
        if not rays:
            return cls.empty()
        return cls(np.array([r.origin for r in rays]), np.array([r.direction for r in rays]))

    @classmethod
    def concat(cls, sets) -> "RaySet":
        sets = list(sets)
        if not sets:
            return cls.empty()
        return cls(np.concatenate([s.origins for s in sets]), np.concatenate([s.directions for s in sets]))

    @property
    def yaws(self) -> np.ndarray:
        return np.arctan2(self.directions[:, 1], self.directions[:, 0])

    @property
    def pitches(self) -> np.ndarray:
        return np.arcsin(np.clip(self.directions[:, 2], -1.0, 1.0))

    def __len__(self) -> int:
        return len(self.origins)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return RaySet(self.origins[i], self.directions[i])
        d = self.directions[i]
        return Ray(
            Point3(*map(float, self.origins[i])),
            tuple(map(float, d)),
            float(math.atan2(d[1], d[0])),
            float(math.asin(max(-1.0, min(1.0, d[2])))),
        )

    def __iter__(self) -> Iterator[Ray]:
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class MountPose:
    position: Point3 = Point3(0.0, 0.0, 0.0)
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", Point3(*(float(c) for c in self.position)))
        for name in ("yaw", "pitch", "roll"):
            object.__setattr__(self, name, wrap_angle(float(getattr(self, name))))

    def rotation(self) -> np.ndarray:
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(-self.pitch), math.sin(-self.pitch)
        cr, sr = math.cos(self.roll), math.sin(self.roll)
        rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
        rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
        return rz @ ry @ rx

    def apply(self, directions: np.ndarray) -> RaySet:
        d = directions @ self.rotation().T
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return RaySet(np.broadcast_to(np.array(self.position), d.shape), d)


@dataclass(frozen=True)
class LidarConfig:
    mount: MountPose
    horizontal_fov: float  # degrees, 360 for rotating units
    vertical_fov: float  # degrees
    horizontal_steps: int
    channels: int

    def __post_init__(self):
        if not 0 < self.horizontal_fov <= 360:
            raise SensorConfigError(f"horizontal_fov must be in (0, 360], got {self.horizontal_fov}")
        if not 0 < self.vertical_fov < 180:
            raise SensorConfigError(f"vertical_fov must be in (0, 180), got {self.vertical_fov}")
        if int(self.horizontal_steps) != self.horizontal_steps or self.horizontal_steps < 1:
            raise SensorConfigError(f"horizontal_steps must be a positive integer, got {self.horizontal_steps}")
        if int(self.channels) != self.channels or self.channels < 2:
            # a single channel leaves the pitch spacing over a non-zero FOV undefined
            raise SensorConfigError(f"channels must be an integer >= 2, got {self.channels}")


@dataclass(frozen=True)
class CameraConfig:
    mount: MountPose
    sensor_width: int
    sensor_height: int
    ray_width: int
    ray_height: int
    focal: float  # pixels

    def __post_init__(self):
        for name in ("sensor_width", "sensor_height", "ray_width", "ray_height"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise SensorConfigError(f"{name} must be a positive integer, got {v}")
        if self.ray_width > self.sensor_width or self.ray_height > self.sensor_height:
            raise SensorConfigError(
                f"ray grid {self.ray_width}x{self.ray_height} exceeds sensor "
                f"{self.sensor_width}x{self.sensor_height}; upsampling is not allowed"
            )
        if not self.focal > 0:
            raise SensorConfigError(f"focal must be positive, got {self.focal}")


@dataclass(frozen=True)
class SensorRig:
    name: str
    lidars: tuple[LidarConfig, ...] = field(default_factory=tuple)
    cameras: tuple[CameraConfig, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "lidars", tuple(self.lidars))
        object.__setattr__(self, "cameras", tuple(self.cameras))
        if not self.lidars and not self.cameras:
            raise SensorConfigError(f"rig {self.name!r} has no sensors")


def focal_from_fov(sensor_width: float, horizontal_fov: float) -> float:
    """Pixel focal length giving ``horizontal_fov`` degrees across ``sensor_width``."""
    if not 0 < horizontal_fov < 180:
        raise SensorConfigError(f"camera FOV must be in (0, 180) degrees, got {horizontal_fov}")
    return (sensor_width / 2) / math.tan(math.radians(horizontal_fov) / 2)


def lidar_directions(cfg: LidarConfig) -> np.ndarray:
    """Unit directions in the mount frame, yaw-major order."""
    I, J = cfg.horizontal_steps, cfg.channels
    yaws = np.radians(cfg.horizontal_fov) * np.arange(I) / I
    v = np.radians(cfg.vertical_fov)
    pitches = -v / 2 + v * np.arange(J) / (J - 1)
    th, ps = np.meshgrid(yaws, pitches, indexing="ij")
    d = np.stack([np.cos(ps) * np.cos(th), np.cos(ps) * np.sin(th), np.sin(ps)], axis=-1)
    return d.reshape(-1, 3)


def lidar_rays(cfg: LidarConfig) -> RaySet:
    return cfg.mount.apply(lidar_directions(cfg))


def camera_directions(cfg: CameraConfig) -> np.ndarray:
    """Unit directions in the mount frame, row-major over the resized image."""
    w0, h0 = cfg.sensor_width, cfg.sensor_height
    u0, v0 = cfg.ray_width, cfg.ray_height
    # resized pixel centers mapped back onto the original sensor
    w = (np.arange(u0) + 0.5) * (w0 / u0)
    h = (np.arange(v0) + 0.5) * (h0 / v0)
    hh, ww = np.meshgrid(h, w, indexing="ij")
    right = ww - w0 / 2
    down = hh - h0 / 2
    d = np.stack([np.full_like(right, cfg.focal), -right, -down], axis=-1).reshape(-1, 3)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def camera_rays(cfg: CameraConfig) -> RaySet:
    return cfg.mount.apply(camera_directions(cfg))


def rig_rays(rig: SensorRig) -> tuple[RaySet, RaySet]:
    """(camera rays, lidar rays) for every sensor of the rig."""
    return (
        RaySet.concat(camera_rays(c) for c in rig.cameras),
        RaySet.concat(lidar_rays(l) for l in rig.lidars),
    )
