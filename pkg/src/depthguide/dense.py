"""Dense volume rendering: stratified + importance sampling and alpha compositing.

This is the low-resolution stage of the pipeline and the oracle every guided
render is checked against.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .camera import Camera, Rays, make_rays
from .fields import RadianceField, field_normal

__all__ = [
    "RenderConfig",
    "RenderOutput",
    "stratified_samples",
    "importance_samples",
    "bin_weights",
    "compositing_weights",
    "composite",
    "render_dense",
]

# Rays per work unit. Each unit owns an RNG stream keyed on (seed, unit index),
# so the output does not depend on how units are scheduled across threads.
CHUNK_RAYS = 4096
# Samples whose compositing weight is below this get no normal evaluation.
_NORMAL_WEIGHT_FLOOR = 1e-7


@dataclass(frozen=True)
class RenderConfig:
    n_uniform: int = 36
    n_importance: int = 36
    seed: int = 0
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    alpha_threshold: float = 0.5
    jitter: bool = True
    compute_normals: bool = True
    normal_step: float | None = None
    threads: int = 1

    def __post_init__(self):
        if self.n_uniform < 2:
            raise ValueError("n_uniform must be at least 2")
        if self.n_importance < 0:
            raise ValueError("n_importance must be non-negative")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if not 0.0 < self.alpha_threshold < 1.0:
            raise ValueError("alpha_threshold must lie in (0, 1)")

    @property
    def samples_per_ray(self) -> int:
        return self.n_uniform + self.n_importance


@dataclass
class RenderOutput:
    """Per-pixel maps of shape ``(H, W[, C])``.

    ``depth`` is the accumulated camera-z (not divided by alpha);
    :meth:`surface_depth` gives the normalized depth with a far sentinel on
    background pixels. ``normal`` is in the camera frame and renormalized where
    alpha exceeds the threshold.
    """

    color: np.ndarray
    depth: np.ndarray
    normal: np.ndarray
    alpha: np.ndarray
    alpha_threshold: float = 0.5
    far: float = np.inf
    stats: dict = field(default_factory=dict)

    @property
    def mask(self) -> np.ndarray:
        return self.alpha > self.alpha_threshold

    def surface_depth(self, sentinel: float | None = None) -> np.ndarray:
        sentinel = self.far if sentinel is None else sentinel
        out = np.full(self.depth.shape, float(sentinel))
        m = self.mask
        out[m] = self.depth[m] / self.alpha[m]
        return out


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def stratified_samples(near: float, far: float, n: int, seed=0, shape=(), jitter: bool = True) -> np.ndarray:
    """One sample per equal-width bin of ``[near, far]``, shape ``shape + (n,)``.

    Without jitter the bin midpoints are returned.
    """
    if n < 2:
        raise ValueError("need at least 2 stratified samples")
    shape = tuple(np.atleast_1d(shape)) if shape != () else ()
    u = _rng(seed).random(shape + (n,)) if jitter else np.full(shape + (n,), 0.5)
    return _stratify(near, far, u)


def _stratify(near: float, far: float, u: np.ndarray) -> np.ndarray:
    n = u.shape[-1]
    return near + (np.arange(n) + u) * ((far - near) / n)


def importance_samples(near: float, far: float, weights, n: int, seed=0, jitter: bool = True) -> np.ndarray:
    """Inverse-CDF samples from the piecewise-constant pdf given by per-bin ``weights``.

    The bins split ``[near, far]`` evenly, one per weight. Rows whose weights are
    all zero fall back to stratified sampling with the same random draws.
    Without jitter the CDF is inverted at the fixed levels ``(k + 0.5) / n``
    and the fallback is the bin midpoints.
    """
    w = np.asarray(weights, dtype=np.float64)
    single = w.ndim == 1
    w = np.atleast_2d(w)
    if np.any(w < 0):
        raise ValueError("importance weights must be non-negative")
    rows, nb = w.shape
    if jitter:
        u = _rng(seed).random((rows, n))
        out = _stratify(near, far, u)
    else:
        u = np.broadcast_to((np.arange(n) + 0.5) / n, (rows, n))
        out = _stratify(near, far, np.full((rows, n), 0.5))

    total = w.sum(axis=-1)
    live = total > 0
    if np.any(live):
        wl = w[live] / total[live, None]
        ul = np.sort(u[live], axis=-1)
        cdf = np.cumsum(wl, axis=-1)
        cdf[:, -1] = 1.0
        nl = wl.shape[0]
        offs = np.arange(nl, dtype=np.float64)[:, None]
        flat = (cdf + offs).ravel()
        k = np.searchsorted(flat, (ul + offs).ravel(), side="right").reshape(nl, n) - offs.astype(np.int64) * nb
        k = np.clip(k, 0, nb - 1)
        lower = np.take_along_axis(np.concatenate([np.zeros((nl, 1)), cdf[:, :-1]], axis=1), k, axis=1)
        pk = np.take_along_axis(wl, k, axis=1)
        frac = np.where(pk > 0, (ul - lower) / np.where(pk > 0, pk, 1.0), 0.5)
        frac = np.clip(frac, 0.0, 1.0)
        width = (far - near) / nb
        out[live] = near + (k + frac) * width
    return out[0] if single else out


def bin_weights(coarse_weights) -> np.ndarray:
    """Importance weight per stratified bin from the coarse sample weights.

    A sample's weight covers the interval after it, but the density rise that
    produced it happened since the previous sample, possibly in the previous
    bin. Each bin therefore takes the larger of its own and the next sample's
    weight so the fine samples bracket the crossing.
    """
    w = np.asarray(coarse_weights, dtype=np.float64)
    nxt = np.concatenate([w[..., 1:], np.zeros(w.shape[:-1] + (1,))], axis=-1)
    return np.maximum(w, nxt)


def compositing_weights(sigma: np.ndarray, deltas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample weights ``T_i * alpha_i`` and final transmittance along the last axis."""
    tau = sigma * deltas
    cum = np.cumsum(tau, axis=-1)
    trans = np.exp(-np.concatenate([np.zeros(tau.shape[:-1] + (1,)), cum[..., :-1]], axis=-1))
    alpha = -np.expm1(-tau)
    return trans * alpha, np.exp(-cum[..., -1])


def _deltas(t: np.ndarray, last: float) -> np.ndarray:
    return np.concatenate([np.diff(t, axis=-1), np.full(t.shape[:-1] + (1,), last)], axis=-1)


def composite(sigma, values, t, background=0.0, last_delta: float | None = None):
    """Alpha-composite samples along rays.

    ``sigma`` and ``t`` have shape ``(..., S)``, ``values`` ``(..., S)`` or
    ``(..., S, C)``. Returns ``(accumulated value, alpha)``. When
    ``last_delta`` is omitted the final interval copies the mean spacing.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if np.any(sigma < 0):
        raise ValueError("densities must be non-negative")
    if t.shape[-1] > 1 and np.any(np.diff(t, axis=-1) <= 0):
        raise ValueError("sample positions must be strictly increasing")
    if last_delta is None:
        span = t[..., -1:] - t[..., :1]
        last_delta = span / max(t.shape[-1] - 1, 1) if t.shape[-1] > 1 else np.ones_like(t[..., :1])
        deltas = np.concatenate([np.diff(t, axis=-1), last_delta], axis=-1)
    else:
        deltas = _deltas(t, last_delta)
    w, t_final = compositing_weights(sigma, deltas)
    bg = np.asarray(background, dtype=np.float64)
    if values.ndim == sigma.ndim:
        out = np.sum(w * values, axis=-1) + t_final * bg
    else:
        out = np.einsum("...s,...sc->...c", w, values) + t_final[..., None] * bg
    return out, 1.0 - t_final


def _render_chunk(field: RadianceField, rays: Rays, forward: np.ndarray, cfg: RenderConfig, chunk_index: int):
    rng = np.random.default_rng([cfg.seed, chunk_index])
    n = len(rays)
    near, far = rays.near, rays.far
    o, d = rays.origins, rays.directions

    t_c = stratified_samples(near, far, cfg.n_uniform, rng, shape=(n,), jitter=cfg.jitter)
    rgb_c, sig_c = field.query((o[:, None, :] + t_c[..., None] * d[:, None, :]).reshape(-1, 3))
    rgb_c = rgb_c.reshape(n, -1, 3)
    sig_c = sig_c.reshape(n, -1)
    queries = t_c.size

    if cfg.n_importance > 0:
        w_c, _ = compositing_weights(sig_c, _deltas(t_c, (far - near) / cfg.n_uniform))
        t_f = importance_samples(near, far, bin_weights(w_c), cfg.n_importance, rng, cfg.jitter)
        rgb_f, sig_f = field.query((o[:, None, :] + t_f[..., None] * d[:, None, :]).reshape(-1, 3))
        queries += t_f.size
        t = np.concatenate([t_c, t_f], axis=1)
        order = np.argsort(t, axis=1, kind="stable")
        t = np.take_along_axis(t, order, axis=1)
        sig = np.take_along_axis(np.concatenate([sig_c, sig_f.reshape(n, -1)], axis=1), order, axis=1)
        rgb = np.take_along_axis(np.concatenate([rgb_c, rgb_f.reshape(n, -1, 3)], axis=1), order[..., None], axis=1)
    else:
        t, sig, rgb = t_c, sig_c, rgb_c

    w, t_final = compositing_weights(sig, _deltas(t, (far - near) / cfg.samples_per_ray))
    alpha = 1.0 - t_final
    color = np.einsum("rs,rsc->rc", w, rgb) + t_final[:, None] * np.asarray(cfg.background)
    z = t * (d @ forward)[:, None]
    depth = np.sum(w * z, axis=1)

    normal = np.zeros((n, 3))
    grad_queries = 0
    if cfg.compute_normals:
        sel = w > _NORMAL_WEIGHT_FLOOR
        if np.any(sel):
            r_idx, s_idx = np.nonzero(sel)
            pts = o[r_idx] + t[r_idx, s_idx, None] * d[r_idx]
            nrm, _ = field_normal(field, pts, cfg.normal_step)
            grad_queries = 6 * pts.shape[0]
            np.add.at(normal, r_idx, w[r_idx, s_idx, None] * nrm)

    buffer_bytes = sum(a.nbytes for a in (t, sig, rgb, w)) + 2 * rgb_c.nbytes
    return color, depth, normal, alpha, queries, grad_queries, buffer_bytes


def render_dense(field: RadianceField, camera: Camera, config: RenderConfig | None = None) -> RenderOutput:
    """Render color, camera-z depth, camera-frame normals and alpha with dense sampling."""
    cfg = config or RenderConfig()
    start = time.perf_counter()
    rays = make_rays(camera)
    n = len(rays)
    starts = list(range(0, n, CHUNK_RAYS))

    def work(k: int):
        s = starts[k]
        return _render_chunk(field, rays.slice(s, s + CHUNK_RAYS), camera.forward, cfg, k)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(work, range(len(starts))))
    else:
        parts = [work(k) for k in range(len(starts))]

    color = np.concatenate([p[0] for p in parts])
    depth = np.concatenate([p[1] for p in parts])
    normal_world = np.concatenate([p[2] for p in parts])
    alpha = np.concatenate([p[3] for p in parts])

    normal = camera.to_camera(normal_world)
    fg = alpha > cfg.alpha_threshold
    norms = np.linalg.norm(normal, axis=-1)
    ok = fg & (norms > 0)
    normal[ok] /= norms[ok, None]

    h, w = camera.height, camera.width
    elapsed = time.perf_counter() - start
    stats = {
        "path": "dense",
        "pixels": n,
        "field_queries": int(sum(p[4] for p in parts)),
        "gradient_queries": int(sum(p[5] for p in parts)),
        "queries_per_pixel": sum(p[4] for p in parts) / n,
        "wall_time_s": elapsed,
        "peak_buffer_bytes": int(max(p[6] for p in parts)),
    }
    return RenderOutput(
        color=color.reshape(h, w, 3),
        depth=depth.reshape(h, w),
        normal=normal.reshape(h, w, 3),
        alpha=alpha.reshape(h, w),
        alpha_threshold=cfg.alpha_threshold,
        far=camera.far,
        stats=stats,
    )
