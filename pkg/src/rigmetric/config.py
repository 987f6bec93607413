"""YAML rig, ROI and scene files.

Angles in files are degrees; lengths meters; camera sizes pixels. A camera
gives either ``fov`` (horizontal, degrees) or ``focal`` (pixels).

Rig file::

    name: wide_center
    cameras:
      - {position: [1.7, 0.0, 1.5], yaw: 0, pitch: 0, roll: 0,
         width: 1600, height: 900, ray_width: 64, ray_height: 36, fov: 70}
    lidars:
      - {position: [0, 0, 1.9], yaw: 0, pitch: 0, roll: 0,
         horizontal_fov: 360, vertical_fov: 50, horizontal_steps: 900, channels: 32}

ROI file::

    origin: [-50, -50, 0]
    length: 100
    width: 100
    height: 8
    resolution: 0.5
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

import yaml

from .dataset import ClassSpec, DatasetError, SceneSpec
from .geometry import GeometryError, Point3, RoiGrid, make_grid
from .sensors import CameraConfig, LidarConfig, MountPose, SensorConfigError, SensorRig, focal_from_fov


class ConfigError(ValueError):
    pass


def _read_yaml(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return doc


def _num(rec: dict, key: str, where: str, default=None) -> float:
    if key not in rec:
        if default is not None:
            return default
        raise ConfigError(f"{where}.{key}: missing")
    v = rec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: expected a finite number, got {v!r}")
    return v


def _int(rec: dict, key: str, where: str) -> int:
    v = _num(rec, key, where)
    if int(v) != v:
        raise ConfigError(f"{where}.{key}: expected an integer, got {v!r}")
    return int(v)


def _pair(rec: dict, key: str, where: str, default=None) -> tuple:
    if key not in rec and default is not None:
        return default
    v = rec.get(key)
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{where}.{key}: expected [low, high]")
    return tuple(_num({"v": c}, "v", f"{where}.{key}") for c in v)


def _position(rec: dict, where: str) -> Point3:
    v = rec.get("position")
    if not isinstance(v, list) or len(v) != 3:
        raise ConfigError(f"{where}.position: expected [x, y, z]")
    return Point3(*(float(_num({"v": c}, "v", f"{where}.position")) for c in v))


def _mount(rec: dict, where: str) -> MountPose:
    return MountPose(
        _position(rec, where),
        math.radians(_num(rec, "yaw", where, 0.0)),
        math.radians(_num(rec, "pitch", where, 0.0)),
        math.radians(_num(rec, "roll", where, 0.0)),
    )


def _camera(rec, where: str) -> CameraConfig:
    if not isinstance(rec, dict):
        raise ConfigError(f"{where}: expected a mapping")
    width = _int(rec, "width", where)
    if ("fov" in rec) == ("focal" in rec):
        raise ConfigError(f"{where}: give exactly one of 'fov' or 'focal'")
    try:
        focal = focal_from_fov(width, _num(rec, "fov", where)) if "fov" in rec else float(_num(rec, "focal", where))
        return CameraConfig(
            _mount(rec, where),
            width,
            _int(rec, "height", where),
            _int(rec, "ray_width", where),
            _int(rec, "ray_height", where),
            focal,
        )
    except SensorConfigError as e:
        raise ConfigError(f"{where}: {e}") from None


def _lidar(rec, where: str) -> LidarConfig:
    if not isinstance(rec, dict):
        raise ConfigError(f"{where}: expected a mapping")
    try:
        return LidarConfig(
            _mount(rec, where),
            float(_num(rec, "horizontal_fov", where)),
            float(_num(rec, "vertical_fov", where)),
            _int(rec, "horizontal_steps", where),
            _int(rec, "channels", where),
        )
    except SensorConfigError as e:
        raise ConfigError(f"{where}: {e}") from None


def parse_rig(doc: dict, default_name: str = "rig") -> SensorRig:
    name = str(doc.get("name", default_name))
    cams = doc.get("cameras") or []
    lids = doc.get("lidars") or []
    if not isinstance(cams, list) or not isinstance(lids, list):
        raise ConfigError(f"rig {name!r}: 'cameras' and 'lidars' must be lists")
    cameras = [_camera(c, f"cameras[{i}]") for i, c in enumerate(cams)]
    lidars = [_lidar(l, f"lidars[{i}]") for i, l in enumerate(lids)]
    try:
        return SensorRig(name, tuple(lidars), tuple(cameras))
    except SensorConfigError as e:
        raise ConfigError(str(e)) from None


def load_rig(path) -> SensorRig:
    path = Path(path)
    try:
        return parse_rig(_read_yaml(path), default_name=path.name.split(".")[0])
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


def _mount_record(m: MountPose) -> dict:
    return {
        "position": list(m.position),
        "yaw": math.degrees(m.yaw),
        "pitch": math.degrees(m.pitch),
        "roll": math.degrees(m.roll),
    }


def rig_record(rig: SensorRig) -> dict:
    return {
        "name": rig.name,
        "cameras": [
            {
                **_mount_record(c.mount),
                "width": c.sensor_width,
                "height": c.sensor_height,
                "ray_width": c.ray_width,
                "ray_height": c.ray_height,
                "focal": c.focal,
            }
            for c in rig.cameras
        ],
        "lidars": [
            {
                **_mount_record(l.mount),
                "horizontal_fov": l.horizontal_fov,
                "vertical_fov": l.vertical_fov,
                "horizontal_steps": l.horizontal_steps,
                "channels": l.channels,
            }
            for l in rig.lidars
        ],
    }


def dump_rig(rig: SensorRig) -> str:
    return yaml.safe_dump(rig_record(rig), sort_keys=False)


def parse_roi(doc: dict) -> RoiGrid:
    origin = doc.get("origin")
    if not isinstance(origin, list) or len(origin) != 3:
        raise ConfigError("origin: expected [x, y, z]")
    vals = [_num(doc, k, "roi") for k in ("length", "width", "height", "resolution")]
    try:
        return make_grid(Point3(*(float(_num({"v": c}, "v", "roi.origin")) for c in origin)), *vals)
    except GeometryError as e:
        raise ConfigError(f"roi: {e}") from None


def load_roi(path) -> RoiGrid:
    try:
        return parse_roi(_read_yaml(path))
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


def roi_record(grid: RoiGrid) -> dict:
    return {
        "origin": list(grid.origin),
        "length": grid.length,
        "width": grid.width,
        "height": grid.height,
        "resolution": grid.resolution,
    }


def dump_roi(grid: RoiGrid) -> str:
    return yaml.safe_dump(roi_record(grid), sort_keys=False)


def default_roi() -> RoiGrid:
    """100 m x 100 m x 8 m centered on the ego, ground at z = 0, 0.5 m voxels."""
    return make_grid(Point3(-50.0, -50.0, 0.0), 100.0, 100.0, 8.0, 0.5)


def parse_scene(doc: dict) -> SceneSpec:
    classes = doc.get("classes")
    if not isinstance(classes, dict) or not classes:
        raise ConfigError("scene.classes: expected a non-empty mapping")
    specs = {}
    for label, rec in classes.items():
        where = f"scene.classes.{label}"
        if not isinstance(rec, dict):
            raise ConfigError(f"{where}: expected a mapping")
        count = _pair(rec, "count", where)
        if any(int(c) != c for c in count):
            raise ConfigError(f"{where}.count: expected integers")
        specs[str(label)] = ClassSpec(
            tuple(int(c) for c in count), _pair(rec, "length", where), _pair(rec, "width", where), _pair(rec, "height", where)
        )
    try:
        return SceneSpec(
            seed=_int(doc, "seed", "scene"),
            frames=_int(doc, "frames", "scene"),
            classes=specs,
            x_range=_pair(doc, "x_range", "scene", (-45.0, 45.0)),
            y_range=_pair(doc, "y_range", "scene", (-10.0, 10.0)),
            ground_z=float(_num(doc, "ground_z", "scene", 0.0)),
            yaw_mode=str(doc.get("yaw_mode", "lane")),
            yaw_jitter=float(_num(doc, "yaw_jitter", "scene", 0.15)),
        )
    except DatasetError as e:
        raise ConfigError(f"scene: {e}") from None


def load_scene(path) -> SceneSpec:
    try:
        return parse_scene(_read_yaml(path))
    except ConfigError as e:
        raise ConfigError(f"{path}: {e}") from None


def scene_record(spec: SceneSpec) -> dict:
    return {
        "seed": spec.seed,
        "frames": spec.frames,
        "x_range": list(spec.x_range),
        "y_range": list(spec.y_range),
        "ground_z": spec.ground_z,
        "yaw_mode": spec.yaw_mode,
        "yaw_jitter": spec.yaw_jitter,
        "classes": {
            label: {k: list(getattr(cs, k)) for k in ("count", "length", "width", "height")}
            for label, cs in spec.classes.items()
        },
    }


def dump_scene(spec: SceneSpec) -> str:
    return yaml.safe_dump(scene_record(spec), sort_keys=False)


FIXTURE_RIGS = tuple(f"{cam}_{lid}" for cam in ("wide", "narrow") for lid in ("center", "pyramid", "line", "trapezoid"))


def fixture_path(name: str) -> Path:
    """Path of a file shipped under ``rigmetric/fixtures`` (e.g. ``rigs/wide_center.yaml``)."""
    return Path(str(resources.files("rigmetric") / "fixtures" / name))


def fixture_rig(name: str) -> SensorRig:
    return load_rig(fixture_path(f"rigs/{name}.yaml"))
