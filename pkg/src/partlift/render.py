"""Camera rig generation and point-splat rasterization with per-point visibility.

Views are produced by perspective-projecting every point and painting a small
disc per point into a nearest-depth z-buffer; the winning point id per pixel
gives the pixel-to-point map that mask voting consumes later.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import splat_zbuffer
from .geometry import PointCloud

BACKGROUND_RGB = (255, 255, 255)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True)
class CameraPose:
    """Look-at pinhole camera with a vertical field of view in degrees."""

    eye: np.ndarray
    target: np.ndarray
    up: np.ndarray
    vertical_fov: float
    image_size: tuple[int, int]  # (width, height)

    def __post_init__(self):
        eye = np.asarray(self.eye, dtype=np.float64)
        target = np.asarray(self.target, dtype=np.float64)
        up = np.asarray(self.up, dtype=np.float64)
        if not 0.0 < self.vertical_fov < 180.0:
            raise ValueError("vertical_fov must be in (0, 180) degrees")
        view = target - eye
        if np.linalg.norm(view) == 0.0:
            raise ValueError("eye must differ from target")
        norm_up = np.linalg.norm(up)
        if norm_up == 0.0:
            raise ValueError("up must be nonzero")
        up = up / norm_up
        if np.linalg.norm(np.cross(view, up)) < 1e-12 * np.linalg.norm(view):
            raise ValueError("up must not be parallel to the view direction")
        w, h = self.image_size
        if w < 1 or h < 1:
            raise ValueError("image_size must be positive")
        object.__setattr__(self, "eye", eye)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "up", up)

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Orthonormal (right, up, forward) camera axes."""
        forward = self.target - self.eye
        forward = forward / np.linalg.norm(forward)
        right = np.cross(forward, self.up)
        right = right / np.linalg.norm(right)
        true_up = np.cross(right, forward)
        return right, true_up, forward


@dataclass(frozen=True)
class ViewRender:
    """One rendered view plus the buffers needed to lift 2D masks back to 3D.

    image: (H, W, 3) uint8; depth: (H, W) float64 with +inf for empty pixels;
    point_index: (H, W) int32 with -1 for empty pixels; visible: (N,) bool;
    pixel_x/pixel_y: (N,) int32 projected pixel per point, -1 when the point
    is behind the camera or lands outside the image.
    """

    view_index: int
    image: np.ndarray
    depth: np.ndarray
    point_index: np.ndarray
    visible: np.ndarray
    pixel_x: np.ndarray
    pixel_y: np.ndarray

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]


def fibonacci_directions(count: int) -> np.ndarray:
    """Near-uniform unit directions from the offset Fibonacci sphere lattice."""
    i = np.arange(count, dtype=np.float64)
    y = 1.0 - 2.0 * (i + 0.5) / count
    r = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    theta = GOLDEN_ANGLE * i
    return np.stack([np.cos(theta) * r, y, np.sin(theta) * r], axis=1)


def bounding_sphere(cloud: PointCloud) -> tuple[np.ndarray, float]:
    """Centroid-centered bounding sphere (center, radius)."""
    center = cloud.centroid
    radius = float(np.sqrt(np.max(np.einsum("ij,ij->i", cloud.positions - center,
                                            cloud.positions - center))))
    return center, radius


def make_camera_rig(cloud: PointCloud, views: int,
                    image_size: tuple[int, int] = (512, 512),
                    fov: float = 60.0,
                    distance_factor: float = 2.2) -> list[CameraPose]:
    """Place `views` cameras on a Fibonacci sphere around the cloud centroid.

    Eye distance is distance_factor times the bounding-sphere radius; every
    camera targets the centroid. Deterministic for fixed inputs.
    """
    if views < 1:
        raise ValueError("views must be positive")
    center, radius = bounding_sphere(cloud)
    if radius == 0.0:
        radius = 1.0  # single-point or fully degenerate cloud
    dirs = fibonacci_directions(views)
    poses = []
    for d in dirs:
        up = np.array([0.0, 0.0, 1.0])
        if abs(d[2]) > 0.999:
            up = np.array([0.0, 1.0, 0.0])
        poses.append(CameraPose(eye=center + d * (distance_factor * radius),
                                target=center, up=up,
                                vertical_fov=fov, image_size=image_size))
    return poses


def project_points(positions: np.ndarray, pose: CameraPose
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized look-at + perspective projection.

    Returns (u, v, depth, in_front): continuous image coordinates, depth along
    the camera forward axis, and a mask of points strictly in front of the eye.
    """
    right, up, forward = pose.basis()
    w, h = pose.image_size
    d = positions - pose.eye
    z = d @ forward
    in_front = z > 0.0
    tan_half_y = math.tan(math.radians(pose.vertical_fov) / 2.0)
    tan_half_x = tan_half_y * (w / h)
    with np.errstate(divide="ignore", invalid="ignore"):
        ndc_x = (d @ right) / (z * tan_half_x)
        ndc_y = (d @ up) / (z * tan_half_y)
    u = (ndc_x + 1.0) * 0.5 * w
    v = (1.0 - ndc_y) * 0.5 * h
    return u, v, z, in_front


def project_point(point: np.ndarray, pose: CameraPose
                  ) -> tuple[tuple[int, int], float] | None:
    """Project one point; returns ((px, py), depth) or None when behind the camera."""
    u, v, z, ok = project_points(np.asarray(point, dtype=np.float64)[None, :], pose)
    if not ok[0]:
        return None
    return (int(math.floor(u[0])), int(math.floor(v[0]))), float(z[0])


def render_view(cloud: PointCloud, pose: CameraPose,
                splat_radius_px: int = 2, depth_tolerance: float = 0.01,
                view_index: int = 0) -> ViewRender:
    """Rasterize the cloud into one view.

    Every in-front point paints a disc of splat_radius_px; the nearest point
    wins each pixel (ties to the lower index). A point is visible when the
    final depth at its projected pixel is within depth_tolerance times the
    scene diameter of its own depth. Background pixels are white.
    """
    if splat_radius_px < 1:
        raise ValueError("splat_radius_px must be positive")
    if depth_tolerance <= 0:
        raise ValueError("depth_tolerance must be positive")
    w, h = pose.image_size
    n = cloud.n
    _, radius = bounding_sphere(cloud)
    scene_diameter = 2.0 * radius

    u, v, z, in_front = project_points(cloud.positions, pose)
    px = np.full(n, -1, dtype=np.int64)
    py = np.full(n, -1, dtype=np.int64)
    px[in_front] = np.floor(u[in_front]).astype(np.int64)
    py[in_front] = np.floor(v[in_front]).astype(np.int64)

    # Points whose disc cannot touch the image are dropped before splatting.
    r = splat_radius_px
    paints = in_front & (px >= -r) & (px <= w - 1 + r) & (py >= -r) & (py <= h - 1 + r)
    ids = np.flatnonzero(paints).astype(np.int32)
    zbuf, winner = splat_zbuffer(np.ascontiguousarray(px[paints]),
                                 np.ascontiguousarray(py[paints]),
                                 np.ascontiguousarray(z[paints]),
                                 ids, w, h, r)

    image = np.full((h, w, 3), BACKGROUND_RGB, dtype=np.uint8)
    painted = winner >= 0
    image[painted] = cloud.colors[winner[painted]]

    in_frame = in_front & (px >= 0) & (px < w) & (py >= 0) & (py < h)
    visible = np.zeros(n, dtype=bool)
    sel = np.flatnonzero(in_frame)
    visible[sel] = zbuf[py[sel], px[sel]] >= z[sel] - depth_tolerance * scene_diameter

    pixel_x = np.where(in_frame, px, -1).astype(np.int32)
    pixel_y = np.where(in_frame, py, -1).astype(np.int32)
    return ViewRender(view_index=view_index, image=image, depth=zbuf,
                      point_index=winner, visible=visible,
                      pixel_x=pixel_x, pixel_y=pixel_y)
