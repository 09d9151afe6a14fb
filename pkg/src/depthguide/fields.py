"""Radiance fields: analytic SDF scenes, voxel grids and tri-plane grids.

Every field maps batches of world points ``(N, 3)`` to ``(rgb (N, 3), sigma (N,))``.
Fields are immutable after construction, so ``query`` may be called from many
threads at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "RadianceField",
    "Sphere",
    "Box",
    "Plane",
    "Texture",
    "SdfScene",
    "VoxelGrid",
    "TriPlaneGrid",
    "sdf_query",
    "triplane_sample",
    "decode_features",
    "field_normal",
    "upsample_field",
]


class RadianceField(Protocol):
    def query(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def normal_potential(self, points: np.ndarray) -> np.ndarray:
        """Scalar whose gradient points along ``-grad(sigma)``."""
        ...

    @property
    def default_normal_step(self) -> float: ...


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    if p.ndim == 1:
        p = p[None, :]
    if p.shape[-1] != 3:
        raise ValueError(f"points must have a trailing axis of size 3, got {p.shape}")
    return p.reshape(-1, 3)


def _inside_box(p: np.ndarray, lo, hi) -> np.ndarray:
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (3,))
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (3,))
    return np.all((p >= lo) & (p <= hi), axis=-1)


# ---------------------------------------------------------------------------
# Analytic SDF scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Texture:
    """Smooth multiplicative pattern ``1 + amplitude * sin(fx) sin(fy) sin(fz)``."""

    frequency: float = 8.0
    amplitude: float = 0.3

    def modulate(self, p: np.ndarray) -> np.ndarray:
        f = self.frequency
        return 1.0 + self.amplitude * np.sin(f * p[:, 0]) * np.sin(f * p[:, 1]) * np.sin(f * p[:, 2])


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float
    albedo: tuple[float, float, float] = (0.8, 0.8, 0.8)
    texture: Texture | None = None

    def distance(self, p: np.ndarray) -> np.ndarray:
        return np.linalg.norm(p - np.asarray(self.center), axis=-1) - self.radius


@dataclass(frozen=True)
class Box:
    center: tuple[float, float, float]
    half_extents: tuple[float, float, float]
    albedo: tuple[float, float, float] = (0.8, 0.8, 0.8)
    texture: Texture | None = None

    def distance(self, p: np.ndarray) -> np.ndarray:
        q = np.abs(p - np.asarray(self.center)) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Plane:
    """Half-space bounded by a plane; ``normal`` points out of the solid side."""

    point: tuple[float, float, float]
    normal: tuple[float, float, float]
    albedo: tuple[float, float, float] = (0.8, 0.8, 0.8)
    texture: Texture | None = None

    def distance(self, p: np.ndarray) -> np.ndarray:
        n = np.asarray(self.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        return (p - np.asarray(self.point)) @ n


Primitive = Sphere | Box | Plane


@dataclass(frozen=True)
class SdfScene:
    """Union of signed-distance primitives turned into density by a logistic shell.

    ``sigma(x) = sigma_max / (1 + exp(s(x) / beta))`` where ``s`` is the union
    distance. Color is the albedo of the nearest primitive.
    """

    primitives: tuple[Primitive, ...]
    beta: float = 0.01
    sigma_max: float = 100.0
    bbox: tuple[tuple[float, float, float], tuple[float, float, float]] | None = None

    def __post_init__(self):
        if not self.primitives:
            raise ValueError("SdfScene needs at least one primitive")
        if self.beta <= 0 or self.sigma_max <= 0:
            raise ValueError("beta and sigma_max must be positive")
        object.__setattr__(self, "primitives", tuple(self.primitives))

    def distances(self, points) -> np.ndarray:
        p = _as_points(points)
        return np.stack([prim.distance(p) for prim in self.primitives], axis=-1)

    def signed_distance(self, points) -> np.ndarray:
        return np.min(self.distances(points), axis=-1)

    def query(self, points) -> tuple[np.ndarray, np.ndarray]:
        p = _as_points(points)
        d = self.distances(p)
        nearest = np.argmin(d, axis=-1)
        s = np.take_along_axis(d, nearest[:, None], axis=-1)[:, 0]
        sigma = self.sigma_max * expit(-s / self.beta)
        albedo = np.array([prim.albedo for prim in self.primitives], dtype=np.float64)
        rgb = albedo[nearest]
        for k, prim in enumerate(self.primitives):
            if prim.texture is None:
                continue
            sel = nearest == k
            if np.any(sel):
                rgb[sel] = rgb[sel] * prim.texture.modulate(p[sel])[:, None]
        rgb = np.clip(rgb, 0.0, 1.0)
        if self.bbox is not None:
            inside = _inside_box(p, *self.bbox)
            sigma = np.where(inside, sigma, 0.0)
        return rgb, sigma

    def normal_potential(self, points) -> np.ndarray:
        # sigma is a decreasing function of s, so grad(s) is parallel to -grad(sigma)
        # and stays resolvable where sigma itself has saturated.
        return self.signed_distance(points)

    @property
    def default_normal_step(self) -> float:
        return self.beta / 10.0


def sdf_query(scene: SdfScene, point) -> tuple[np.ndarray, float]:
    """Single-point convenience wrapper around :meth:`SdfScene.query`."""
    rgb, sigma = scene.query(point)
    return rgb[0], float(sigma[0])


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


def _grid_coords(c: np.ndarray, lo: float, hi: float, n: int):
    """Align-corners mapping of a coordinate to (lower index, fraction)."""
    u = (c - lo) / (hi - lo) * (n - 1)
    u = np.clip(u, 0.0, n - 1)
    i0 = np.minimum(np.floor(u).astype(np.int64), max(n - 2, 0))
    return i0, u - i0


def _bilinear(plane: np.ndarray, a: np.ndarray, b: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Sample ``plane[C, Ra, Rb]`` at coordinates (a, b); returns ``(N, C)``."""
    _, ra, rb = plane.shape
    ia, fa = _grid_coords(a, lo, hi, ra)
    ib, fb = _grid_coords(b, lo, hi, rb)
    ia1 = np.minimum(ia + 1, ra - 1)
    ib1 = np.minimum(ib + 1, rb - 1)
    fa = fa[:, None]
    fb = fb[:, None]
    v00 = plane[:, ia, ib].T
    v01 = plane[:, ia, ib1].T
    v10 = plane[:, ia1, ib].T
    v11 = plane[:, ia1, ib1].T
    return (v00 * (1 - fa) * (1 - fb) + v01 * (1 - fa) * fb
            + v10 * fa * (1 - fb) + v11 * fa * fb)


def decode_features(features) -> tuple[np.ndarray, np.ndarray]:
    """Fixed decoder: clamp channels 0-2 to [0, 1] for color, softplus of channel 3 for density."""
    f = np.asarray(features, dtype=np.float64)
    if f.shape[-1] < 4:
        raise ValueError(f"decoding needs at least 4 feature channels, got {f.shape[-1]}")
    rgb = np.clip(f[..., :3], 0.0, 1.0)
    sigma = np.logaddexp(0.0, f[..., 3])
    return rgb, sigma


@dataclass(frozen=True)
class TriPlaneGrid:
    """Three axis-aligned feature planes over a cubic box.

    ``planes`` has shape ``(3, C, R, R)``; plane 0 is indexed by (x, y),
    plane 1 by (y, z) and plane 2 by (z, x). Texel ``i`` sits at
    ``lo + i * (hi - lo) / (R - 1)`` (align-corners).
    """

    planes: np.ndarray
    bbox: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        planes = np.array(self.planes, dtype=np.float64)
        if planes.ndim != 4 or planes.shape[0] != 3 or planes.shape[2] != planes.shape[3]:
            raise ValueError(f"planes must have shape (3, C, R, R), got {planes.shape}")
        if planes.shape[2] < 2:
            raise ValueError("plane resolution must be at least 2")
        planes.setflags(write=False)
        object.__setattr__(self, "planes", planes)

    @property
    def channels(self) -> int:
        return self.planes.shape[1]

    @property
    def resolution(self) -> int:
        return self.planes.shape[2]

    @property
    def texel_size(self) -> float:
        lo, hi = self.bbox
        return (hi - lo) / (self.resolution - 1)

    def sample(self, points) -> np.ndarray:
        p = _as_points(points)
        lo, hi = self.bbox
        inside = _inside_box(p, lo, hi)
        x, y, z = p[:, 0], p[:, 1], p[:, 2]
        feat = (_bilinear(self.planes[0], x, y, lo, hi)
                + _bilinear(self.planes[1], y, z, lo, hi)
                + _bilinear(self.planes[2], z, x, lo, hi))
        feat[~inside] = 0.0
        return feat

    def query(self, points) -> tuple[np.ndarray, np.ndarray]:
        p = _as_points(points)
        rgb, sigma = decode_features(self.sample(p))
        outside = ~_inside_box(p, *self.bbox)
        rgb[outside] = 0.0
        sigma[outside] = 0.0
        return rgb, sigma

    def normal_potential(self, points) -> np.ndarray:
        return -self.query(points)[1]

    @property
    def default_normal_step(self) -> float:
        return 0.5 * self.texel_size


def triplane_sample(grid: TriPlaneGrid, point) -> np.ndarray:
    """Summed bilinear features of a single point (zeros outside the box)."""
    return grid.sample(point)[0]


@dataclass(frozen=True)
class VoxelGrid:
    """Trilinear (rgb, sigma) volume over a cubic box; ``values`` is ``(Rx, Ry, Rz, 4)``."""

    values: np.ndarray
    bbox: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 4 or v.shape[-1] != 4:
            raise ValueError(f"values must have shape (Rx, Ry, Rz, 4), got {v.shape}")
        if min(v.shape[:3]) < 2:
            raise ValueError("voxel resolution must be at least 2 per axis")
        if np.any(v[..., 3] < 0):
            raise ValueError("voxel densities must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def resolution(self) -> tuple[int, int, int]:
        return tuple(self.values.shape[:3])

    @property
    def voxel_size(self) -> float:
        lo, hi = self.bbox
        return (hi - lo) / (max(self.resolution) - 1)

    def interpolate(self, points) -> np.ndarray:
        p = _as_points(points)
        lo, hi = self.bbox
        idx, frac = zip(*(_grid_coords(p[:, k], lo, hi, n) for k, n in enumerate(self.resolution)))
        out = np.zeros((p.shape[0], 4))
        for corner in range(8):
            bits = [(corner >> k) & 1 for k in range(3)]
            w = np.ones(p.shape[0])
            ii = []
            for k in range(3):
                w = w * (frac[k] if bits[k] else 1.0 - frac[k])
                ii.append(np.minimum(idx[k] + bits[k], self.resolution[k] - 1))
            out += w[:, None] * self.values[ii[0], ii[1], ii[2]]
        out[~_inside_box(p, lo, hi)] = 0.0
        return out

    def query(self, points) -> tuple[np.ndarray, np.ndarray]:
        v = self.interpolate(points)
        return np.clip(v[:, :3], 0.0, 1.0), np.maximum(v[:, 3], 0.0)

    def normal_potential(self, points) -> np.ndarray:
        return -self.query(points)[1]

    @property
    def default_normal_step(self) -> float:
        return 0.5 * self.voxel_size


# ---------------------------------------------------------------------------
# Shared operations
# ---------------------------------------------------------------------------


def field_normal(field: RadianceField, points, h: float | None = None):
    """Unit normals ``normalize(-grad sigma)`` by central differences.

    Returns ``(normals (N, 3), defined (N,))``; points with vanishing gradient
    get a zero normal and ``defined = False``.
    """
    if h is None:
        h = field.default_normal_step
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    p = _as_points(points)
    n = p.shape[0]
    offsets = np.concatenate([np.eye(3), -np.eye(3)]) * h
    probe = (p[:, None, :] + offsets[None, :, :]).reshape(-1, 3)
    phi = field.normal_potential(probe).reshape(n, 6)
    grad = (phi[:, :3] - phi[:, 3:]) / (2.0 * h)
    norm = np.linalg.norm(grad, axis=-1)
    defined = norm > 0.0
    normals = np.zeros_like(grad)
    normals[defined] = grad[defined] / norm[defined, None]
    return normals, defined


def _upsample_axis(a: np.ndarray, axis: int, new_n: int) -> np.ndarray:
    n = a.shape[axis]
    u = np.linspace(0.0, n - 1, new_n)
    i0 = np.minimum(np.floor(u).astype(np.int64), n - 2)
    f = u - i0
    shape = [1] * a.ndim
    shape[axis] = new_n
    f = f.reshape(shape)
    return np.take(a, i0, axis=axis) * (1 - f) + np.take(a, i0 + 1, axis=axis) * f


def upsample_field(grid: TriPlaneGrid | VoxelGrid, factor: int, preserve_nodes: bool = True):
    """Separable linear upsampling of a grid field.

    With ``preserve_nodes`` the new resolution is ``factor * (R - 1) + 1`` so
    every original texel is also a texel of the result and the decoded field
    is unchanged. Otherwise the resolution is ``factor * R`` (align-corners).
    """
    if int(factor) != factor or factor < 2:
        raise ValueError(f"upsampling factor must be an integer >= 2, got {factor}")
    factor = int(factor)

    def new_size(n: int) -> int:
        return factor * (n - 1) + 1 if preserve_nodes else factor * n

    if isinstance(grid, TriPlaneGrid):
        planes = grid.planes
        r = new_size(grid.resolution)
        planes = _upsample_axis(planes, 2, r)
        planes = _upsample_axis(planes, 3, r)
        return TriPlaneGrid(planes, grid.bbox)
    if isinstance(grid, VoxelGrid):
        v = grid.values
        for axis, n in enumerate(grid.resolution):
            v = _upsample_axis(v, axis, new_size(n))
        return VoxelGrid(v, grid.bbox)
    raise TypeError(f"cannot upsample {type(grid).__name__}")
