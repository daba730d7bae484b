"""3-D frames and the pinhole camera.

Three right-handed frames cooperate here:

- the world frame: x/y span the floor plane, z points up, units are meters;
- the robot frame: origin on the floor under the vehicle, x points forward,
  y points left, z up; a planar pose (x, y, heading) places it in the world;
- the camera frame: z runs along the optical axis, x points right in the
  image, y points down, so pixel coordinates grow rightward and downward.

The camera is rigidly mounted on the robot.  `CameraModel` carries the pixel
intrinsics plus that mount transform and converts both ways between pixels
and robot-frame rays; planar world/robot conversions live on `Pose2`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

Vec3 = Tuple[float, float, float]


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


def ang_diff(a: float, b: float) -> float:
    """Signed angular difference a - b, wrapped to (-pi, pi]."""
    return normalize_angle(a - b)


def rot_z(theta: float) -> np.ndarray:
    """Rotation about the vertical axis, as a 3x3 matrix."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose2:
    """Planar pose of the robot frame in the world frame.

    The robot origin stays on the floor plane and its z-axis stays parallel
    to the world's, so a position plus a heading determines the full rigid
    transform.  Heading is normalized to (-pi, pi] on construction.
    """

    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    def robot_to_world(self, p: Vec3) -> Vec3:
        c, s = math.cos(self.heading), math.sin(self.heading)
        px, py, pz = p
        return (self.x + c * px - s * py, self.y + s * px + c * py, pz)

    def world_to_robot(self, p: Vec3) -> Vec3:
        c, s = math.cos(self.heading), math.sin(self.heading)
        dx, dy, dz = p[0] - self.x, p[1] - self.y, p[2]
        return (c * dx + s * dy, -s * dx + c * dy, dz)

    def position_error(self, other: "Pose2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def heading_error(self, other: "Pose2") -> float:
        return abs(ang_diff(self.heading, other.heading))


@dataclass(frozen=True)
class Edge3:
    """Straight 3-D segment in the world frame, in meters."""

    p0: Vec3
    p1: Vec3

    _HORIZONTAL_TOL = 1e-9

    def __post_init__(self) -> None:
        if self.length <= 0.0:
            raise ValueError(f"degenerate 3-D edge at {self.p0}")

    @property
    def length(self) -> float:
        dx, dy, dz = (self.p1[i] - self.p0[i] for i in range(3))
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    @property
    def midpoint(self) -> Vec3:
        return (
            (self.p0[0] + self.p1[0]) / 2.0,
            (self.p0[1] + self.p1[1]) / 2.0,
            (self.p0[2] + self.p1[2]) / 2.0,
        )

    @property
    def direction(self) -> Vec3:
        """Unit direction (sign follows endpoint order)."""
        n = self.length
        return tuple((self.p1[i] - self.p0[i]) / n for i in range(3))  # type: ignore[return-value]

    @property
    def is_horizontal(self) -> bool:
        return abs(self.p1[2] - self.p0[2]) <= self._HORIZONTAL_TOL * max(1.0, self.length)

    @property
    def is_vertical(self) -> bool:
        dx = self.p1[0] - self.p0[0]
        dy = self.p1[1] - self.p0[1]
        return math.hypot(dx, dy) <= self._HORIZONTAL_TOL * max(1.0, self.length)


# Camera axes expressed in robot coordinates for a forward-looking, untilted
# mount: image-right is robot-left negated, image-down is straight down, and
# the optical axis runs along robot-forward.
_FORWARD_MOUNT = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus the rigid camera-on-robot mount.

    `r_mount` maps camera-frame coordinates into the robot frame and
    `t_mount` is the camera center in the robot frame, so a camera point
    X_c sits at `r_mount @ X_c + t_mount` on the robot.
    """

    focal_px: float
    width_px: int
    height_px: int
    principal_point: Tuple[float, float]
    r_mount: np.ndarray = field(repr=False)
    t_mount: np.ndarray = field(repr=False)

    _ORTHONORMAL_TOL = 1e-9

    def __post_init__(self) -> None:
        if self.focal_px <= 0.0:
            raise ValueError("focal length must be positive")
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("image dimensions must be positive")
        r = np.asarray(self.r_mount, dtype=float).reshape(3, 3)
        t = np.asarray(self.t_mount, dtype=float).reshape(3)
        if np.abs(r.T @ r - np.eye(3)).max() > self._ORTHONORMAL_TOL:
            raise ValueError("mount rotation is not orthonormal")
        if np.linalg.det(r) < 0.0:
            raise ValueError("mount rotation flips handedness")
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "r_mount", r)
        object.__setattr__(self, "t_mount", t)

    @classmethod
    def level_mount(
        cls,
        height_m: float,
        focal_px: float = 420.0,
        width_px: int = 640,
        height_px: int = 480,
        forward_m: float = 0.0,
        tilt_down_rad: float = 0.0,
    ) -> "CameraModel":
        """Forward-looking camera at a given height, optionally pitched down.

        A positive tilt rotates the optical axis below the horizon (the ray
        through the image center then strikes the floor height/tan(tilt)
        meters ahead of the camera).
        """
        c, s = math.cos(tilt_down_rad), math.sin(tilt_down_rad)
        pitch = np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])
        return cls(
            focal_px=focal_px,
            width_px=width_px,
            height_px=height_px,
            principal_point=(width_px / 2.0, height_px / 2.0),
            r_mount=_FORWARD_MOUNT @ pitch,
            t_mount=np.array([forward_m, 0.0, height_m]),
        )

    @property
    def camera_center_robot(self) -> np.ndarray:
        return self.t_mount

    def to_camera(self, p_robot: Vec3) -> np.ndarray:
        """Robot-frame point expressed in camera coordinates."""
        return self.r_mount.T @ (np.asarray(p_robot, dtype=float) - self.t_mount)

    def project_robot(
        self, p_robot: Vec3, min_depth_m: float = 1e-9
    ) -> Optional[Tuple[float, float]]:
        """Pixel coordinates of a robot-frame point; None if not in front."""
        xc, yc, zc = self.to_camera(p_robot)
        if zc < min_depth_m:
            return None
        u = self.principal_point[0] + self.focal_px * xc / zc
        v = self.principal_point[1] + self.focal_px * yc / zc
        return (u, v)

    def ray_robot(self, u: float, v: float) -> Tuple[np.ndarray, np.ndarray]:
        """Line of sight through a pixel: (origin, unit direction) in the robot frame."""
        d_cam = np.array(
            [
                (u - self.principal_point[0]) / self.focal_px,
                (v - self.principal_point[1]) / self.focal_px,
                1.0,
            ]
        )
        d = self.r_mount @ d_cam
        return self.t_mount, d / np.linalg.norm(d)

    def in_frame(self, u: float, v: float) -> bool:
        return 0.0 <= u <= self.width_px and 0.0 <= v <= self.height_px
