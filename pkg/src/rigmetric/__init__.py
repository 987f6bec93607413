"""Information-gain surrogate metrics for camera-LiDAR sensor rigs."""

from .geometry import OrientedBox, Point3, RoiGrid, VoxelIndex, make_grid, point_in_obb, voxel_center, voxel_index, voxels_in_box
from .occupancy import (
    OccupancyGrid,
    binary_entropy,
    build_pog,
    conditional_entropy,
    information_gain,
    s_mig,
    s_ms,
    total_entropy,
)
from .sensors import CameraConfig, LidarConfig, MountPose, Ray, RaySet, SensorRig, camera_rays, focal_from_fov, lidar_rays, rig_rays
from .traversal import CoverageSet, coverage, traverse

__version__ = "0.1.0"
