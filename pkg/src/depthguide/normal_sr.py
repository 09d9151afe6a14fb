"""Normal-guided 2x depth super-resolution and multi-depth map construction.

Index conventions: an output pixel at 1-indexed column ``x`` has parent column
``m = (x + 1) // 2``; ``x = 2m - 1`` is the left child and ``x = 2m`` the right
one (same for rows, with ``y = 2n - 1`` the upper child). In 0-indexed numpy
terms the left/upper children are the even indices.

Depth gradients are metric: the camera-z change over one output-pixel step,
rightwards for ``dx`` and downwards (raster rows) for ``dy``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import Camera
from .morphology import StructuringElement, aggregate, extremum_source

__all__ = [
    "DepthGradients",
    "MultiDepthMap",
    "SRConfig",
    "gradients_from_normals",
    "sr_weights",
    "upsample2x",
    "bilinear2x",
    "parent_index",
    "build_multi_depth",
]

EPS_Z = 0.05
EPS_G = 1e-8


@dataclass
class DepthGradients:
    dx: np.ndarray
    dy: np.ndarray
    grazing: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.dx.shape


@dataclass
class MultiDepthMap:
    """Per-pixel ascending candidate depths ``(H, W, K)`` plus a foreground mask."""

    channels: np.ndarray
    mask: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[:2]

    @property
    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.channels, axis=-1) >= 0))


@dataclass(frozen=True)
class SRConfig:
    """Options for :func:`build_multi_depth`.

    ``method`` is ``"normal"`` or ``"bilinear"``; ``weighting`` is ``"even"``
    (plane-exact first-order offsets) or ``"softmax"`` (direction weights
    favouring the smaller gradient). With ``channel_normals`` each aggregated
    channel is offset using the normal of the pixel its depth came from;
    otherwise all channels share the pixel's own normal.
    """

    method: str = "normal"
    weighting: str = "even"
    passes: int = 2
    aggregate: bool = True
    eps_z: float = EPS_Z
    eps_g: float = EPS_G
    alpha_threshold: float = 0.5
    dilate_mask: bool = True
    channel_normals: bool = True

    def __post_init__(self):
        if self.method not in ("normal", "bilinear"):
            raise ValueError(f"unknown super-resolution method {self.method!r}")
        if self.weighting not in ("even", "softmax"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if self.passes < 1:
            raise ValueError("need at least one 2x pass")


def parent_index(x):
    """1-indexed parent coordinate ``floor((x + 1) / 2)``."""
    return (np.asarray(x) + 1) // 2


def gradients_from_normals(normals, footprint, eps_z: float = EPS_Z, view_dirs=None) -> DepthGradients:
    """Per-output-step depth changes from camera-frame normals.

    ``footprint`` is the world width of one *input* pixel (scalar or map); an
    output step is half of it. Without ``view_dirs`` the slope is
    ``N_x / N_z``; with camera-frame ray directions ``(u, v, -1)`` the
    perspective-correct denominator ``-N . dir`` is used instead, which equals
    ``N_z`` on the principal ray. Pixels whose denominator falls below
    ``eps_z`` are flagged as grazing and get zero gradients.
    """
    n = np.asarray(normals, dtype=np.float64)
    if np.any(np.asarray(footprint) <= 0):
        raise ValueError("pixel footprint must be positive")
    if view_dirs is None:
        denom = n[..., 2]
    else:
        denom = -np.sum(n * np.asarray(view_dirs, dtype=np.float64), axis=-1)
    grazing = np.abs(denom) < eps_z
    safe = np.where(grazing, eps_z, np.abs(denom)) * np.where(denom < 0, -1.0, 1.0)
    step = 0.5 * np.asarray(footprint, dtype=np.float64)
    dx = n[..., 0] / safe * step
    dy = -n[..., 1] / safe * step
    dx = np.where(grazing, 0.0, dx)
    dy = np.where(grazing, 0.0, dy)
    return DepthGradients(dx, dy, grazing)


def sr_weights(dx, dy, first_x, first_y, weighting: str = "softmax"):
    """Signed direction weights for an output pixel.

    Magnitudes are ``softmax(-|dx|, -|dy|)`` (or 1/2 each with ``"even"``);
    ``w_x`` is negative for the left child and ``w_y`` for the upper child.
    """
    dx = np.asarray(dx, dtype=np.float64)
    dy = np.asarray(dy, dtype=np.float64)
    if weighting == "even":
        wx = np.full(np.broadcast(dx, dy).shape, 0.5)
    elif weighting == "softmax":
        ax, ay = np.abs(dx), np.abs(dy)
        # shift by the smaller magnitude for stability; ratio unchanged
        lo = np.minimum(ax, ay)
        ex, ey = np.exp(lo - ax), np.exp(lo - ay)
        wx = ex / (ex + ey)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    wy = 1.0 - wx
    wx = np.where(first_x, -wx, wx)
    wy = np.where(first_y, -wy, wy)
    return wx, wy


def _repeat2(a: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(a, 2, axis=0), 2, axis=1)


def upsample2x(depth, grads: DepthGradients, weighting: str = "even", eps_g: float = EPS_G) -> np.ndarray:
    """Each output pixel is its parent's depth plus a signed blend of the parent's gradients.

    ``depth`` is ``(H, W)`` or ``(H, W, K)``. Gradients of shape ``(H, W)`` add
    the same offset to every channel; ``(H, W, K)`` gradients give each channel
    its own. Where the gradient magnitude is below ``eps_g`` children copy the
    parent exactly.
    """
    d = np.asarray(depth, dtype=np.float64)
    if d.shape[:2] != grads.shape[:2]:
        raise ValueError(f"depth {d.shape[:2]} and gradients {grads.shape[:2]} differ in resolution")
    per_channel = grads.dx.ndim == 3
    if per_channel and (d.ndim != 3 or d.shape[2] != grads.dx.shape[2]):
        raise ValueError("per-channel gradients need a matching multi-channel depth")
    h, w = grads.shape[:2]
    dx = _repeat2(grads.dx)
    dy = _repeat2(grads.dy)
    first_y = (np.arange(2 * h) % 2 == 0)[:, None]
    first_x = (np.arange(2 * w) % 2 == 0)[None, :]
    if per_channel:
        first_y, first_x = first_y[..., None], first_x[..., None]
    wx, wy = sr_weights(dx, dy, first_x, first_y, weighting)
    mag = np.hypot(dx, dy)
    # The blend is normalized by the gradient magnitude and rescaled by the same
    # metric length, so only the flat-region guard survives.
    offset = np.where(mag < eps_g, 0.0, wx * dx + wy * dy)
    out = _repeat2(d)
    if out.ndim == 3 and not per_channel:
        offset = offset[..., None]
    return out + offset


def bilinear2x(a) -> np.ndarray:
    """2x bilinear upsampling with pixel-center alignment and replicated borders."""
    a = np.asarray(a, dtype=np.float64)

    def axis_up(x: np.ndarray, axis: int) -> np.ndarray:
        n = x.shape[axis]
        idx = np.arange(n)
        prev = np.take(x, np.maximum(idx - 1, 0), axis=axis)
        nxt = np.take(x, np.minimum(idx + 1, n - 1), axis=axis)
        first = 0.75 * x + 0.25 * prev
        second = 0.75 * x + 0.25 * nxt
        out = np.stack([first, second], axis=axis + 1)
        shape = list(x.shape)
        shape[axis] = 2 * n
        return out.reshape(shape)

    return axis_up(axis_up(a, 0), 1)


def _renormalize(n: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(n, axis=-1, keepdims=True)
    return np.where(norm > 0, n / np.where(norm > 0, norm, 1.0), 0.0)


def _view_dirs(camera: Camera, h: int, w: int) -> np.ndarray:
    cam = camera.with_resolution(w, h)
    px, py = cam.pixel_centers()
    return cam.camera_directions(px, py).reshape(h, w, 3), cam.focal


def build_multi_depth(depth, normals, alpha, se: StructuringElement | None = None,
                      config: SRConfig | None = None, camera: Camera | None = None,
                      footprint=None, sentinel: float | None = None) -> MultiDepthMap:
    """Low-resolution depth/normal/alpha to a sorted K=3 multi-depth map at ``2**passes`` x.

    ``depth`` is the normalized surface depth. Metric scale comes from
    ``camera`` (footprint ``depth / focal`` and perspective-correct slopes) or
    from an explicit ``footprint`` in world units per input pixel.
    """
    cfg = config or SRConfig()
    se = se or StructuringElement()
    d = np.asarray(depth, dtype=np.float64)
    n = np.asarray(normals, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    if d.shape != a.shape or n.shape[:2] != d.shape:
        raise ValueError("depth, normal and alpha maps must share a resolution")
    if camera is None and footprint is None and cfg.method == "normal":
        raise ValueError("normal-guided super-resolution needs a camera or a pixel footprint")
    mask = a > cfg.alpha_threshold
    if sentinel is None:
        sentinel = camera.far if camera is not None else float(np.max(d[mask])) if np.any(mask) else 1.0

    n = np.where(mask[..., None], n, 0.0)
    if cfg.aggregate:
        agg = aggregate(d, se, mask, sentinel=sentinel, dilate_mask=cfg.dilate_mask)
        channels, hr_mask = agg.channels, agg.mask
        if cfg.channel_normals:
            filled = np.where(mask, d, sentinel)
            n = np.stack([extremum_source(filled, n, se, "min"), n,
                          extremum_source(filled, n, se, "max")], axis=2)
    else:
        d = np.where(mask, d, sentinel)
        channels, hr_mask = np.repeat(d[..., None], 3, axis=-1), mask

    h, w = d.shape
    for p in range(cfg.passes):
        if cfg.method == "bilinear":
            channels = bilinear2x(channels)
        else:
            per_channel = n.ndim == 4
            if camera is not None:
                dirs, focal = _view_dirs(camera, h, w)
                fp = np.maximum(channels if per_channel else channels[..., 1], 1e-12) / focal
                if per_channel:
                    dirs = dirs[:, :, None, :]
            else:
                dirs = None
                fp = np.asarray(footprint, dtype=np.float64) / 2**p
                if fp.ndim == 2 and fp.shape != (h, w):
                    fp = fp.repeat(2**p, axis=0).repeat(2**p, axis=1)
                if per_channel and fp.ndim == 2:
                    fp = fp[..., None]
            grads = gradients_from_normals(n, fp, cfg.eps_z, view_dirs=dirs)
            channels = upsample2x(channels, grads, cfg.weighting, cfg.eps_g)
            if p + 1 < cfg.passes:
                n = _renormalize(bilinear2x(n))
        hr_mask = _repeat2(hr_mask)
        h, w = 2 * h, 2 * w

    channels = np.sort(channels, axis=-1)
    return MultiDepthMap(channels, hr_mask)
