"""Pinhole camera, per-pixel rays, unprojection and yaw orbits.

Camera frame: +x right, +y up, the camera looks down -z. ``rotation`` maps
camera-frame vectors to world vectors (its columns are the camera axes).
Pixel ``(i, j)`` (column, row) has its center at raster ``(i + 0.5, j + 0.5)``;
rows run top to bottom. Depth everywhere means camera-z distance
``t * <d, forward>``, not distance along the ray.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = ["Camera", "Rays", "make_rays", "unproject", "project", "yaw_orbit", "look_at"]


@dataclass(frozen=True)
class Camera:
    position: np.ndarray
    rotation: np.ndarray
    fov: float
    width: int
    height: int
    near: float
    far: float

    def __post_init__(self):
        pos = np.array(self.position, dtype=np.float64).reshape(3)
        rot = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9, rtol=0):
            raise ValueError("camera rotation must be orthonormal")
        if not 0 < self.fov < np.pi:
            raise ValueError(f"field of view must lie in (0, pi), got {self.fov}")
        if not 0 < self.near < self.far:
            raise ValueError(f"need 0 < near < far, got near={self.near}, far={self.far}")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")
        pos.setflags(write=False)
        rot.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "rotation", rot)

    @property
    def forward(self) -> np.ndarray:
        return -self.rotation[:, 2]

    @property
    def focal(self) -> float:
        """Focal length in pixels (vertical field of view)."""
        return 0.5 * self.height / np.tan(0.5 * self.fov)

    def with_resolution(self, width: int, height: int) -> "Camera":
        return replace(self, width=int(width), height=int(height))

    def scaled(self, factor: int) -> "Camera":
        return self.with_resolution(self.width * factor, self.height * factor)

    def pixel_footprint(self, depth) -> np.ndarray:
        """World-space width of one pixel at camera-z ``depth``."""
        return np.asarray(depth, dtype=np.float64) / self.focal

    def camera_directions(self, px, py) -> np.ndarray:
        """Unnormalized camera-frame directions with z = -1 for raster coords."""
        px = np.asarray(px, dtype=np.float64)
        py = np.asarray(py, dtype=np.float64)
        x = (px - 0.5 * self.width) / self.focal
        y = -(py - 0.5 * self.height) / self.focal
        return np.stack([x, y, -np.ones_like(x)], axis=-1)

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Row-major raster coordinates ``(px, py)`` of every pixel center."""
        jj, ii = np.meshgrid(np.arange(self.height), np.arange(self.width), indexing="ij")
        return (ii.ravel() + 0.5), (jj.ravel() + 0.5)

    def to_camera(self, vectors) -> np.ndarray:
        """Rotate world vectors into the camera frame."""
        return np.asarray(vectors, dtype=np.float64) @ self.rotation

    def to_world(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=np.float64) @ self.rotation.T


@dataclass(frozen=True)
class Rays:
    """Batch of rays; ``directions`` are unit vectors, t runs over [near, far]."""

    origins: np.ndarray
    directions: np.ndarray
    near: float
    far: float

    def __len__(self) -> int:
        return self.directions.shape[0]

    def slice(self, start: int, stop: int) -> "Rays":
        return Rays(self.origins[start:stop], self.directions[start:stop], self.near, self.far)


def look_at(position, target, up=(0.0, 1.0, 0.0), fov_degrees: float = 30.0,
            width: int = 64, height: int = 64, near: float = 0.1, far: float = 10.0) -> Camera:
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward /= np.linalg.norm(forward)
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(right) < 1e-12:
        raise ValueError("up vector is parallel to the viewing direction")
    right /= np.linalg.norm(right)
    true_up = np.cross(right, forward)
    rotation = np.stack([right, true_up, -forward], axis=1)
    return Camera(position, rotation, np.deg2rad(fov_degrees), width, height, near, far)


def make_rays(camera: Camera) -> Rays:
    px, py = camera.pixel_centers()
    d = camera.to_world(camera.camera_directions(px, py))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    origins = np.broadcast_to(camera.position, d.shape)
    return Rays(origins, d, camera.near, camera.far)


def unproject(camera: Camera, px, py, depth) -> np.ndarray:
    """World point at camera-z ``depth`` behind raster position ``(px, py)``."""
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise ValueError("depth must be positive")
    d = camera.camera_directions(px, py)
    return camera.position + camera.to_world(d * depth[..., None])


def project(camera: Camera, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raster coordinates and camera-z depth of world points."""
    pc = camera.to_camera(np.asarray(points, dtype=np.float64) - camera.position)
    depth = -pc[..., 2]
    px = pc[..., 0] / depth * camera.focal + 0.5 * camera.width
    py = -pc[..., 1] / depth * camera.focal + 0.5 * camera.height
    return px, py, depth


def _yaw_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def yaw_orbit(camera: Camera, yaw: float, pivot=(0.0, 0.0, 0.0)) -> Camera:
    """Rotate the camera about the world +y axis through ``pivot``.

    The whole frame is rotated, so a camera aimed at the pivot stays aimed at it
    and its distance to the pivot is unchanged.
    """
    if abs(yaw) >= np.pi:
        raise ValueError(f"yaw must satisfy |yaw| < pi, got {yaw}")
    if yaw == 0:
        return camera
    rot = _yaw_matrix(yaw)
    pivot = np.asarray(pivot, dtype=np.float64)
    position = pivot + rot @ (camera.position - pivot)
    return replace(camera, position=position, rotation=rot @ camera.rotation)
