"""Preset scenes, the JSON scene format and exact ray casting for SDF scenes.

Scene files are JSON objects::

    {
      "schema": "depthguide.scene/1",
      "name": "sphere",
      "field": {
        "kind": "sdf",                      # or "triplane" / "voxel"
        "beta": 0.01, "sigma_max": 100.0,
        "bbox": [[-2, -2, -1], [2, 2, 1]],  # optional, null = unbounded
        "primitives": [
          {"type": "sphere", "center": [0, 0, 0], "radius": 0.5,
           "albedo": [0.8, 0.5, 0.3], "texture": {"frequency": 8, "amplitude": 0.3}},
          {"type": "box", "center": [...], "half_extents": [...], "albedo": [...]},
          {"type": "plane", "point": [...], "normal": [...], "albedo": [...]}
        ]
      },
      "camera": {"position": [0, 0, 3], "look_at": [0, 0, 0], "up": [0, 1, 0],
                 "fov_degrees": 30, "width": 128, "height": 128, "near": 1, "far": 5},
      "background": [0, 0, 0],
      "pivot": [0, 0, 0]
    }

Grid fields use ``{"kind": "triplane", "path": "grid.bin", "hr_factor": 4}``
(path relative to the scene file) or ``{"kind": "triplane", "preset": "blob",
"resolution": 32, "hr_factor": 4}``. The high-resolution field of a grid scene
is the grid upsampled by ``hr_factor``; SDF scenes use the same field for both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .camera import Camera, look_at, make_rays
from .fields import (Box, Plane, SdfScene, Sphere, Texture, TriPlaneGrid, VoxelGrid, field_normal,
                     upsample_field)
from .io import atomic_write_bytes, read_grid

__all__ = [
    "Scene",
    "PRESETS",
    "DEFAULT_SUITE",
    "preset",
    "load_scene",
    "scene_to_dict",
    "save_scene",
    "blob_triplane",
    "trace_depth",
    "trace_surface",
]

SCHEMA = "depthguide.scene/1"


@dataclass(frozen=True)
class Scene:
    name: str
    field: object
    hr_field: object
    camera: Camera
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    pivot: tuple[float, float, float] = (0.0, 0.0, 0.0)
    spec: dict = field(default_factory=dict, compare=False)

    def camera_at(self, resolution: int, yaw: float = 0.0) -> Camera:
        from .camera import yaw_orbit
        cam = self.camera.with_resolution(resolution, resolution)
        return yaw_orbit(cam, yaw, self.pivot) if yaw else cam


# ---------------------------------------------------------------------------
# JSON <-> objects
# ---------------------------------------------------------------------------


def _texture(d):
    return None if not d else Texture(float(d.get("frequency", 8.0)), float(d.get("amplitude", 0.3)))


def _primitive(d: dict):
    kind = d.get("type")
    albedo = tuple(float(v) for v in d.get("albedo", (0.8, 0.8, 0.8)))
    tex = _texture(d.get("texture"))
    if kind == "sphere":
        return Sphere(tuple(d["center"]), float(d["radius"]), albedo, tex)
    if kind == "box":
        return Box(tuple(d["center"]), tuple(d["half_extents"]), albedo, tex)
    if kind == "plane":
        return Plane(tuple(d["point"]), tuple(d["normal"]), albedo, tex)
    raise ValueError(f"unknown primitive type {kind!r}")


def _field_from_dict(d: dict, base: Path | None):
    kind = d.get("kind")
    if kind == "sdf":
        bbox = d.get("bbox")
        bbox = None if bbox is None else (tuple(bbox[0]), tuple(bbox[1]))
        scene = SdfScene(tuple(_primitive(p) for p in d["primitives"]),
                         float(d.get("beta", 0.01)), float(d.get("sigma_max", 100.0)), bbox)
        return scene, scene
    if kind in ("triplane", "voxel"):
        factor = int(d.get("hr_factor", 4))
        if "path" in d:
            p = Path(d["path"])
            grid = read_grid(p if p.is_absolute() or base is None else base / p)
        elif d.get("preset") == "blob" and kind == "triplane":
            grid = blob_triplane(int(d.get("resolution", 32)), int(d.get("channels", 4)),
                                 float(d.get("gain", 3000.0)))
        else:
            raise ValueError("grid fields need a 'path' or a known 'preset'")
        if (kind == "triplane") != isinstance(grid, TriPlaneGrid):
            raise ValueError(f"grid file does not hold a {kind}")
        return grid, upsample_field(grid, factor)
    raise ValueError(f"unknown field kind {kind!r}")


def _camera_from_dict(d: dict) -> Camera:
    return look_at(d["position"], d.get("look_at", (0, 0, 0)), d.get("up", (0, 1, 0)),
                   float(d.get("fov_degrees", 30.0)), int(d.get("width", 64)),
                   int(d.get("height", d.get("width", 64))), float(d.get("near", 1.0)),
                   float(d.get("far", 5.0)))


def scene_from_dict(d: dict, base: Path | None = None) -> Scene:
    if d.get("schema", SCHEMA) != SCHEMA:
        raise ValueError(f"unsupported scene schema {d.get('schema')!r}")
    lr, hr = _field_from_dict(d["field"], base)
    return Scene(
        name=str(d.get("name", "scene")),
        field=lr,
        hr_field=hr,
        camera=_camera_from_dict(d["camera"]),
        background=tuple(float(v) for v in d.get("background", (0, 0, 0))),
        pivot=tuple(float(v) for v in d.get("pivot", (0, 0, 0))),
        spec=d,
    )


def load_scene(path) -> Scene:
    path = Path(path)
    with open(path) as fh:
        d = json.load(fh)
    return scene_from_dict(d, path.parent)


def scene_to_dict(scene: Scene) -> dict:
    return scene.spec


def save_scene(scene: Scene, path) -> None:
    atomic_write_bytes(path, (json.dumps(scene_to_dict(scene), indent=2) + "\n").encode())


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

_CAMERA = {"position": [0.0, 0.0, 3.0], "look_at": [0.0, 0.0, 0.0], "up": [0.0, 1.0, 0.0],
           "fov_degrees": 30.0, "width": 128, "height": 128, "near": 1.0, "far": 5.0}
_TEX = {"frequency": 8.0, "amplitude": 0.3}
# Thinner shell than the SdfScene defaults (same sigma_max * beta) so the
# semi-transparent halo at grazing silhouettes stays within a few HR pixels.
PRESET_BETA = 0.002
PRESET_SIGMA_MAX = 500.0


def _sdf_spec(name: str, primitives: list, bbox=None) -> dict:
    return {
        "schema": SCHEMA,
        "name": name,
        "field": {"kind": "sdf", "beta": PRESET_BETA, "sigma_max": PRESET_SIGMA_MAX, "bbox": bbox,
                  "primitives": primitives},
        "camera": dict(_CAMERA),
        "background": [0.0, 0.0, 0.0],
        "pivot": [0.0, 0.0, 0.0],
    }


def _sphere_spec() -> dict:
    return _sdf_spec("sphere", [
        {"type": "sphere", "center": [0, 0, 0], "radius": 0.5, "albedo": [0.85, 0.45, 0.3], "texture": _TEX},
    ])


def _two_spheres_spec() -> dict:
    return _sdf_spec("two_spheres", [
        {"type": "sphere", "center": [-0.1, 0.0, -0.25], "radius": 0.45,
         "albedo": [0.3, 0.55, 0.85], "texture": _TEX},
        {"type": "sphere", "center": [0.22, 0.12, 0.3], "radius": 0.22,
         "albedo": [0.9, 0.8, 0.3], "texture": _TEX},
    ])


# Front face of the box and the backdrop, as camera-z depths from the frontal view.
STEP_NEAR_DEPTH = 2.75
STEP_FAR_DEPTH = 3.5


def _step_edge_spec() -> dict:
    return _sdf_spec("step_edge", [
        {"type": "box", "center": [-0.35, 0.0, 0.0], "half_extents": [0.45, 0.6, 0.25],
         "albedo": [0.85, 0.5, 0.35], "texture": _TEX},
        {"type": "plane", "point": [0, 0, -0.5], "normal": [0, 0, 1],
         "albedo": [0.35, 0.6, 0.4], "texture": _TEX},
    ], bbox=[[-2.0, -2.0, -1.0], [2.0, 2.0, 1.0]])


def _tilted_plane_spec() -> dict:
    # One oblique plane that fills every view of the sweep: no silhouettes and
    # no creases, so depth varies only through the plane's slope.
    return _sdf_spec("tilted_plane", [
        {"type": "plane", "point": [0, 0, 0], "normal": [0.25, 0.5, 1.0],
         "albedo": [0.8, 0.7, 0.4], "texture": _TEX},
    ], bbox=[[-3.0, -3.0, -2.5], [3.0, 3.0, 2.5]])


def _blob_spec() -> dict:
    d = _sdf_spec("triplane_blob", [])
    d["field"] = {"kind": "triplane", "preset": "blob", "resolution": 32, "channels": 4,
                  "gain": 3000.0, "hr_factor": 4}
    return d


def blob_triplane(resolution: int = 32, channels: int = 4, gain: float = 3000.0,
                  radius: float = 0.42) -> TriPlaneGrid:
    """Tri-plane blob: the summed density channel is ``gain * (radius^2 - |p|^2)``.

    Colors are smooth stripes; channels beyond 4 are zero.
    """
    if channels < 4:
        raise ValueError("a decodable tri-plane needs at least 4 channels")
    c = np.linspace(-1.0, 1.0, resolution)
    a, b = np.meshgrid(c, c, indexing="ij")
    planes = np.zeros((3, channels, resolution, resolution))
    for k in range(3):
        planes[k, 3] = gain * (radius**2 / 3.0 - 0.5 * (a**2 + b**2))
    planes[0, 0] = 0.30 + 0.15 * np.sin(5 * a)
    planes[1, 1] = 0.25 + 0.12 * np.cos(4 * b)
    planes[2, 2] = 0.20 + 0.10 * np.sin(3 * a + 2 * b)
    planes[0, 1] = 0.10 + 0.05 * np.cos(6 * b)
    planes[1, 2] = 0.10
    planes[2, 0] = 0.25
    return TriPlaneGrid(planes, (-1.0, 1.0))


PRESETS: dict[str, Callable[[], dict]] = {
    "sphere": _sphere_spec,
    "two_spheres": _two_spheres_spec,
    "step_edge": _step_edge_spec,
    "tilted_plane": _tilted_plane_spec,
    "triplane_blob": _blob_spec,
}

DEFAULT_SUITE = ("sphere", "two_spheres", "step_edge", "tilted_plane", "triplane_blob")


def preset(name: str) -> Scene:
    try:
        spec = PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown scene preset {name!r}; choose from {sorted(PRESETS)}") from None
    return scene_from_dict(spec)


# ---------------------------------------------------------------------------
# Exact depth for SDF scenes
# ---------------------------------------------------------------------------


def trace_depth(scene: SdfScene, camera: Camera, sentinel: float | None = None,
                min_step: float = 1e-4, bisections: int = 50) -> np.ndarray:
    """Camera-z depth of the zero level set along every pixel ray.

    Sphere tracing with a floor of ``min_step`` per step; the first sign change
    of the distance inside the scene box is refined by bisection. Rays that
    reach ``far`` without a crossing get ``sentinel`` (default ``camera.far``).
    """
    sentinel = camera.far if sentinel is None else sentinel
    rays = make_rays(camera)
    o, d = rays.origins, rays.directions
    n = len(rays)

    def inside_box(p):
        if scene.bbox is None:
            return np.ones(p.shape[0], dtype=bool)
        lo, hi = (np.asarray(v) for v in scene.bbox)
        return np.all((p >= lo) & (p <= hi), axis=-1)

    def dist(idx, t):
        p = o[idx] + t[:, None] * d[idx]
        s = scene.signed_distance(p)
        # outside the box nothing is solid
        return np.where(inside_box(p), s, np.maximum(np.abs(s), min_step))

    t = np.full(n, rays.near)
    t_prev = t.copy()
    active = np.ones(n, dtype=bool)
    crossed = np.zeros(n, dtype=bool)
    while np.any(active):
        idx = np.flatnonzero(active)
        s = dist(idx, t[idx])
        hit = s <= 0
        crossed[idx[hit]] = True
        active[idx[hit]] = False
        go = idx[~hit]
        t_prev[go] = t[go]
        t[go] += np.maximum(s[~hit], min_step)
        active[go[t[go] > rays.far]] = False

    idx = np.flatnonzero(crossed)
    lo_t, hi_t = t_prev[idx].copy(), t[idx].copy()
    for _ in range(bisections):
        mid = 0.5 * (lo_t + hi_t)
        solid = dist(idx, mid) <= 0
        hi_t = np.where(solid, mid, hi_t)
        lo_t = np.where(solid, lo_t, mid)
    t_hit = np.full(n, np.nan)
    t_hit[idx] = hi_t
    z = t_hit * (d @ camera.forward)
    z[~crossed] = sentinel
    return z.reshape(camera.height, camera.width)


def trace_surface(scene: SdfScene, camera: Camera, sentinel: float | None = None):
    """Exact depth, camera-frame unit normals and hit mask of an SDF scene.

    Normals are the normalized SDF gradient at the traced hit points; misses
    get zero normals and ``sentinel`` depth.
    """
    depth = trace_depth(scene, camera, sentinel=np.inf)
    hit = np.isfinite(depth)
    normals = np.zeros(depth.shape + (3,))
    if np.any(hit):
        rays = make_rays(camera)
        fwd = rays.directions @ camera.forward
        t = depth.reshape(-1)[hit.reshape(-1)] / fwd[hit.reshape(-1)]
        pts = rays.origins[hit.reshape(-1)] + t[:, None] * rays.directions[hit.reshape(-1)]
        nrm, _ = field_normal(scene, pts)
        normals[hit] = camera.to_camera(nrm)
    sentinel = camera.far if sentinel is None else sentinel
    return np.where(hit, depth, sentinel), normals, hit
