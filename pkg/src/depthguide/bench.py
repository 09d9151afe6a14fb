"""Dense-versus-guided HR rendering benchmark."""

from __future__ import annotations

import csv
import statistics
from pathlib import Path

from .metrics import psnr, ssim
from .pipeline import PipelineConfig, render_oracle, run_pipeline
from .guided import render_guided
from .dense import render_dense

__all__ = ["BENCH_COLUMNS", "bench_scene", "run_bench", "append_csv", "next_run_id"]

BENCH_COLUMNS = [
    "run_id",
    "scene",
    "lr_resolution",
    "hr_resolution",
    "runs",
    "dense_ms",
    "guided_ms",
    "speedup",
    "dense_queries_per_pixel",
    "guided_queries_per_pixel",
    "guided_queries_per_foreground_pixel",
    "psnr",
    "ssim",
    "dense_peak_bytes",
    "guided_peak_bytes",
    "pipeline_ms",
]


def bench_scene(scene, config: PipelineConfig | None = None, runs: int = 3) -> dict:
    """Median wall-clock of ``runs`` dense and guided HR renders of one scene.

    The guided timing covers the HR render alone, from a multi-depth map built
    once; the dense timing is the oracle render at the same resolution.
    """
    if runs < 1:
        raise ValueError("need at least one run")
    cfg = (config or PipelineConfig()).with_background(scene.background)
    res = run_pipeline(scene.field, scene.hr_field, scene.camera, cfg)
    guided_s, dense_s = [], []
    ref = None
    for _ in range(runs):
        out = render_guided(scene.hr_field, res.camera_hr, res.multi_depth, cfg.guided)
        guided_s.append(out.stats["wall_time_s"])
        ref = render_oracle(scene.hr_field, res.camera_hr, cfg)
        dense_s.append(ref.stats["wall_time_s"])
    dense_ms = 1000.0 * statistics.median(dense_s)
    guided_ms = 1000.0 * statistics.median(guided_s)
    return {
        "scene": scene.name,
        "lr_resolution": cfg.lr_resolution,
        "hr_resolution": cfg.hr_resolution,
        "runs": runs,
        "dense_ms": dense_ms,
        "guided_ms": guided_ms,
        "speedup": dense_ms / guided_ms if guided_ms > 0 else float("inf"),
        "dense_queries_per_pixel": ref.stats["queries_per_pixel"],
        "guided_queries_per_pixel": out.stats["queries_per_pixel"],
        "guided_queries_per_foreground_pixel": out.stats["queries_per_foreground_pixel"],
        "psnr": psnr(out.color, ref.color),
        "ssim": ssim(out.color, ref.color),
        "dense_peak_bytes": ref.stats["peak_buffer_bytes"],
        "guided_peak_bytes": out.stats["peak_buffer_bytes"],
        "pipeline_ms": 1000.0 * res.timings["total_s"],
    }


def run_bench(scenes, config: PipelineConfig | None = None, runs: int = 3, run_id: int = 1) -> list[dict]:
    scenes = list(scenes)
    if not scenes:
        raise ValueError("benchmark suite is empty")
    return [{"run_id": run_id, **bench_scene(s, config, runs)} for s in scenes]


def next_run_id(path) -> int:
    """One more than the largest run id already in the CSV at ``path`` (1 if none)."""
    p = Path(path)
    if not p.exists():
        return 1
    with open(p, newline="") as fh:
        ids = [int(row["run_id"]) for row in csv.DictReader(fh) if row.get("run_id")]
    return max(ids, default=0) + 1


def append_csv(path, rows: list[dict]) -> None:
    """Append rows, writing the header first when the file is new."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    new = not p.exists() or p.stat().st_size == 0
    with open(p, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS, lineterminator="\n")
        if new:
            writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in BENCH_COLUMNS})
