"""Image and depth error measures and the yaw-sweep consistency harness."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .camera import Camera, yaw_orbit
from .morphology import StructuringElement, dilate, erode
from .pipeline import PipelineConfig, render_oracle, run_pipeline

__all__ = [
    "LUMA_WEIGHTS",
    "REPORT_SCHEMA",
    "psnr",
    "ssim",
    "to_luma",
    "depth_rmse",
    "silhouette_band",
    "interior_mask",
    "ConsistencyReport",
    "consistency_sweep",
    "parse_yaw_spec",
]

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
REPORT_SCHEMA = "depthguide.consistency/1"


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _select(diff: np.ndarray, mask) -> np.ndarray:
    if mask is None:
        return diff.ravel()
    m = np.asarray(mask, dtype=bool)
    if m.shape != diff.shape[:m.ndim]:
        raise ValueError(f"mask shape {m.shape} does not match image {diff.shape}")
    sel = diff[m].ravel()
    if sel.size == 0:
        raise ValueError("mask selects no pixels")
    return sel


def psnr(a, b, peak: float = 1.0, mask=None) -> float:
    """``10 log10(peak^2 / MSE)`` over all values (or the masked pixels).

    Identical inputs give ``inf``. The squared errors are summed with
    ``math.fsum`` so the result does not depend on summation order.
    """
    a, b = _pair(a, b)
    sq = _select((a - b) ** 2, mask)
    mse = math.fsum(sq.tolist()) / sq.size
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def to_luma(image) -> np.ndarray:
    """Rec. 601 luma of an ``(H, W, 3)`` image; 2-D input is returned as is."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 2:
        return a
    if a.ndim == 3 and a.shape[2] == 3:
        return a @ LUMA_WEIGHTS
    raise ValueError(f"expected a grayscale or RGB image, got shape {a.shape}")


def ssim(a, b, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03,
         data_range: float = 1.0, truncate: float = 3.5) -> float:
    """Mean structural similarity with a Gaussian window (11x11 for the defaults).

    Color inputs are compared on luma. Local statistics use the window
    weights (population covariance); a border of half the window width is
    left out of the mean.
    """
    a, b = _pair(a, b)
    x, y = to_luma(a), to_luma(b)
    radius = int(truncate * sigma + 0.5)
    if min(x.shape) < 2 * radius + 1:
        raise ValueError(f"images must be at least {2 * radius + 1} pixels on each side")

    def blur(v):
        return gaussian_filter(v, sigma, truncate=truncate, mode="reflect")

    mx, my = blur(x), blur(y)
    vx = blur(x * x) - mx * mx
    vy = blur(y * y) - my * my
    cxy = blur(x * y) - mx * my
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    s = num / den
    inner = s[radius:-radius, radius:-radius]
    return float(np.clip(math.fsum(inner.ravel().tolist()) / inner.size, -1.0, 1.0))


def depth_rmse(a, b, mask=None) -> float:
    """Root-mean-square depth difference over ``mask`` (all pixels by default)."""
    a, b = _pair(a, b)
    sq = _select((a - b) ** 2, mask)
    return math.sqrt(math.fsum(sq.tolist()) / sq.size)


def silhouette_band(depth, mask=None, radius: int = 2, jump: float = 0.1) -> np.ndarray:
    """Pixels within ``radius`` of a depth discontinuity or a mask boundary.

    A pixel is on a discontinuity when its 3x3 neighbourhood spans more than
    ``jump`` in depth or contains both mask states.
    """
    d = np.asarray(depth, dtype=np.float64)
    se = StructuringElement(1)
    spread = dilate(d, se) - erode(d, se)
    edge = spread > jump
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64)
        edge |= dilate(m, se) != erode(m, se)
    if radius == 0:
        return edge
    return dilate(edge.astype(np.float64), StructuringElement(radius)) > 0


def interior_mask(mask, depth, radius: int = 2, jump: float = 0.1) -> np.ndarray:
    """Foreground pixels farther than ``radius`` from any silhouette."""
    m = np.asarray(mask, dtype=bool)
    return m & ~silhouette_band(depth, m, radius, jump)


@dataclass
class ConsistencyReport:
    """Per-view scores of guided renders against the dense oracle."""

    yaws: list[float]
    psnr: list[float]
    ssim: list[float]
    views: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.yaws) == len(self.psnr) == len(self.ssim)):
            raise ValueError("yaws, psnr and ssim must have one entry per view")
        for s in self.ssim:
            if not -1.0 <= s <= 1.0:
                raise ValueError(f"SSIM {s} outside [-1, 1]")

    @property
    def mean_psnr(self) -> float:
        finite = [p for p in self.psnr if math.isfinite(p)]
        if len(finite) < len(self.psnr):
            return math.inf
        return math.fsum(finite) / len(finite)

    @property
    def min_psnr(self) -> float:
        return min(self.psnr)

    @property
    def mean_ssim(self) -> float:
        return math.fsum(self.ssim) / len(self.ssim)

    @property
    def min_ssim(self) -> float:
        return min(self.ssim)

    def to_dict(self) -> dict:
        def num(v):
            return v if math.isfinite(v) else "inf"

        return {
            "schema": REPORT_SCHEMA,
            "meta": self.meta,
            "summary": {
                "views": len(self.yaws),
                "mean_psnr": num(self.mean_psnr),
                "min_psnr": num(self.min_psnr),
                "mean_ssim": self.mean_ssim,
                "min_ssim": self.min_ssim,
            },
            "views": [
                {"yaw": y, "psnr": num(p), "ssim": s, **extra}
                for y, p, s, extra in zip(self.yaws, self.psnr, self.ssim,
                                          self.views or [{}] * len(self.yaws))
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        keys = sorted({k for v in self.views for k in v}) if self.views else []
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["schema", "yaw", "psnr", "ssim", *keys])
        for i, (y, p, s) in enumerate(zip(self.yaws, self.psnr, self.ssim)):
            extra = self.views[i] if self.views else {}
            writer.writerow([REPORT_SCHEMA, repr(y), repr(p), repr(s), *(extra.get(k, "") for k in keys)])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "ConsistencyReport":
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        views = d["views"]
        extras = [{k: v for k, v in view.items() if k not in ("yaw", "psnr", "ssim")} for view in views]
        return cls([v["yaw"] for v in views], [float(v["psnr"]) for v in views],
                   [v["ssim"] for v in views], extras, d.get("meta", {}))


def parse_yaw_spec(spec: str) -> list[float]:
    """``"start:end:count"`` to ``count`` evenly spaced yaws including both ends."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"yaw spec must be 'start:end:count', got {spec!r}")
    try:
        start, end, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ValueError(f"yaw spec must be 'start:end:count', got {spec!r}") from None
    if count < 1:
        raise ValueError("yaw count must be at least 1")
    if count == 1:
        if start != end:
            raise ValueError("a single-view yaw spec needs start == end")
        return [start]
    return [float(v) for v in np.linspace(start, end, count)]


def consistency_sweep(field_lr, field_hr, camera: Camera, yaws, config: PipelineConfig | None = None,
                      pivot=(0.0, 0.0, 0.0), oracle_cache: dict | None = None,
                      threads: int = 1) -> ConsistencyReport:
    """Score the full pipeline against dense HR renders over a list of yaws.

    Each view orbits ``camera`` about ``pivot``. ``oracle_cache`` (keyed by
    yaw and HR resolution) lets several pipeline variants share oracle renders.
    """
    yaws = [float(y) for y in yaws]
    if not yaws:
        raise ValueError("need at least one yaw")
    cfg = config or PipelineConfig()

    def view(yaw: float):
        cam = yaw_orbit(camera, yaw, pivot) if yaw else camera
        res = run_pipeline(field_lr, field_hr, cam, cfg)
        key = (yaw, cfg.hr_resolution, cfg.oracle)
        ref = oracle_cache.get(key) if oracle_cache is not None else None
        if ref is None:
            ref = render_oracle(field_hr, res.camera_hr, cfg)
            if oracle_cache is not None:
                oracle_cache[key] = ref
        extra = {
            "queries_per_foreground_pixel": res.hr.stats["queries_per_foreground_pixel"],
            "guided_ms": 1000.0 * res.hr.stats["wall_time_s"],
            "dense_lr_ms": 1000.0 * res.lr.stats["wall_time_s"],
            "oracle_ms": 1000.0 * ref.stats["wall_time_s"],
        }
        return psnr(res.hr.color, ref.color), ssim(res.hr.color, ref.color), extra

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(view, yaws))
    else:
        results = [view(y) for y in yaws]
    meta = {
        "lr_resolution": cfg.lr_resolution,
        "hr_resolution": cfg.hr_resolution,
        "sr_method": cfg.sr.method,
        "aggregate": cfg.sr.aggregate,
        "seed": cfg.render.seed,
        "oracle_seed": cfg.oracle.seed,
    }
    return ConsistencyReport(yaws, [r[0] for r in results], [r[1] for r in results],
                             [r[2] for r in results], meta)
