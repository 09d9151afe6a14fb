"""Command-line entry point: ``depthguide <command> [options]``.

Commands: ``render-lr``, ``build-depth``, ``render-hr``, ``bench`` and
``sweep``. Exit status is 0 on success, 2 for usage or input errors and 3 when
a pipeline contract is violated (mismatched or unsorted maps, missing stage
outputs).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import append_csv, next_run_id, run_bench
from .dense import RenderOutput, render_dense
from .guided import render_guided, sample_budget_report
from .io import atomic_write_bytes, read_pfm, sha256_file, write_pfm, write_png
from .metrics import consistency_sweep, parse_yaw_spec, psnr, ssim
from .morphology import StructuringElement
from .normal_sr import MultiDepthMap, build_multi_depth
from .pipeline import PROFILES, PipelineConfig, profile, render_oracle, run_pipeline
from .scenes import DEFAULT_SUITE, PRESETS, Scene, load_scene, preset

__all__ = ["main", "InputError", "ContractError", "MANIFEST_SCHEMA"]

MANIFEST_SCHEMA = "depthguide.manifest/1"
EXIT_INPUT = 2
EXIT_CONTRACT = 3


class InputError(Exception):
    """Bad arguments or unreadable inputs (exit status 2)."""


class ContractError(Exception):
    """Inputs that break a stage's contract (exit status 3)."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _git_revision() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return out.stdout.strip() or None if out.returncode == 0 else None


def _write_json(path: Path, data) -> None:
    atomic_write_bytes(path, (json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n").encode())


def _write_manifest(out: Path, command: str, config: dict, inputs: list[Path], outputs: list[Path],
                    timings: dict) -> Path:
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "command": command,
        "version": __version__,
        "config": config,
        "config_hash": _config_hash(config),
        "git_revision": _git_revision(),
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {p.name: sha256_file(p) for p in outputs},
        "timings": timings,
    }
    path = out / f"{command}.manifest.json"
    _write_json(path, manifest)
    return path


def _resolve_scene(spec: str) -> Scene:
    if spec in PRESETS:
        return preset(spec)
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"scene {spec!r} is neither a preset ({', '.join(sorted(PRESETS))}) nor a file")
    try:
        return load_scene(path)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"invalid scene file {spec}: {exc}") from None


def _pipeline_config(args, **sr_overrides) -> PipelineConfig:
    cfg = profile(args.profile)
    render = dataclasses.replace(cfg.render, seed=args.seed, threads=args.threads)
    oracle = dataclasses.replace(cfg.oracle, threads=args.threads)
    sr = cfg.sr
    se = cfg.se
    if sr_overrides:
        se_width = sr_overrides.pop("se", None)
        if se_width is not None:
            se = StructuringElement(se_width)
        sr = dataclasses.replace(sr, **sr_overrides)
    return dataclasses.replace(cfg, render=render, oracle=oracle, sr=sr, se=se)


def _sr_overrides(args) -> dict:
    out = {}
    for name in ("method", "eps_z", "eps_g", "weighting"):
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    if getattr(args, "no_aggregate", False):
        out["aggregate"] = False
    if getattr(args, "se", None) is not None:
        if args.se < 0:
            raise InputError("--se must be a non-negative half width")
        out["se"] = args.se
    return out


def _camera(scene: Scene, cfg: PipelineConfig, yaw: float):
    try:
        return scene.camera_at(cfg.lr_resolution, yaw)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _read_map(path: Path, what: str) -> np.ndarray:
    if not path.is_file():
        raise ContractError(f"missing {what} map: {path}")
    try:
        return read_pfm(path)
    except (OSError, ValueError) as exc:
        raise ContractError(f"unreadable {what} map {path}: {exc}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_render_lr(args) -> int:
    scene = _resolve_scene(args.scene)
    cfg = _pipeline_config(args).with_background(scene.background)
    cam = _camera(scene, cfg, args.yaw)
    out_lr: RenderOutput = render_dense(scene.field, cam, cfg.render)
    out = Path(args.out)
    maps = {
        "lr_color.pfm": out_lr.color,
        "lr_depth.pfm": out_lr.depth,
        "lr_normal.pfm": out_lr.normal,
        "lr_alpha.pfm": out_lr.alpha,
    }
    write_png(out / "lr_color.png", out_lr.color)
    for name, data in maps.items():
        write_pfm(out / name, data)
    config = {"scene": args.scene, "yaw": args.yaw, "pipeline": _jsonable(cfg)}
    outputs = [out / "lr_color.png"] + [out / n for n in maps]
    _write_manifest(out, "render-lr", config, [], outputs, {
        "render_ms": 1000.0 * out_lr.stats["wall_time_s"],
        "field_queries": out_lr.stats["field_queries"],
    })
    print(f"render-lr: {cam.width}x{cam.height} {scene.name} -> {out}")
    return 0


def cmd_build_depth(args) -> int:
    scene = _resolve_scene(args.scene)
    cfg = _pipeline_config(args, **_sr_overrides(args))
    if args.passes is not None and args.passes < 1:
        raise InputError("--passes must be at least 1")
    passes = cfg.sr.passes if args.passes is None else args.passes
    out = Path(args.out)
    paths = {
        "depth": Path(args.depth) if args.depth else out / "lr_depth.pfm",
        "normal": Path(args.normal) if args.normal else out / "lr_normal.pfm",
        "alpha": Path(args.alpha) if args.alpha else out / "lr_alpha.pfm",
    }
    if args.alpha is None and not paths["alpha"].is_file():
        # no coverage map: every pixel is foreground and depth is already per-surface
        del paths["alpha"]
    maps = {k: _read_map(p, k) for k, p in paths.items()}
    depth, normal = maps["depth"], maps["normal"]
    alpha = maps.get("alpha", np.ones(depth.shape[:2], dtype=np.float32))
    if depth.ndim != 2 or alpha.ndim != 2 or normal.ndim != 3:
        raise ContractError("depth and alpha must be single-channel and normals three-channel")
    if not (depth.shape == alpha.shape == normal.shape[:2]):
        raise ContractError(f"resolution mismatch: depth {depth.shape}, normal {normal.shape[:2]}, "
                            f"alpha {alpha.shape}")
    h, w = depth.shape
    cam = scene.camera_at(cfg.lr_resolution, args.yaw).with_resolution(w, h)
    d = np.asarray(depth, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    fg = a > cfg.sr.alpha_threshold
    surface = np.full(d.shape, cam.far)
    surface[fg] = d[fg] / a[fg]
    sr = dataclasses.replace(cfg.sr, passes=passes)
    start = time.perf_counter()
    md = build_multi_depth(surface, normal, a, cfg.se, sr, camera=cam)
    elapsed = time.perf_counter() - start
    outputs = [out / "multi_depth.pfm", out / "multi_depth_mask.pfm"]
    write_pfm(outputs[0], md.channels)
    write_pfm(outputs[1], md.mask.astype(np.float32))
    config = {"scene": args.scene, "yaw": args.yaw, "se": _jsonable(cfg.se), "sr": _jsonable(sr)}
    _write_manifest(out, "build-depth", config, list(paths.values()), outputs, {"build_ms": 1000.0 * elapsed})
    print(f"build-depth: {w}x{h} -> {md.shape[1]}x{md.shape[0]} x{md.channels.shape[2]} channels")
    return 0


def _load_multi_depth(args, out: Path) -> tuple[MultiDepthMap, list[Path]]:
    path = Path(args.multi_depth) if args.multi_depth else out / "multi_depth.pfm"
    mask_path = Path(args.mask) if args.mask else path.with_name(path.stem + "_mask.pfm")
    channels = _read_map(path, "multi-depth")
    if channels.ndim != 3 or channels.shape[2] != 3:
        raise ContractError(f"multi-depth map must have 3 channels, got shape {channels.shape}")
    if mask_path.is_file():
        mask = _read_map(mask_path, "multi-depth mask") > 0.5
        inputs = [path, mask_path]
    else:
        mask = np.ones(channels.shape[:2], dtype=bool)
        inputs = [path]
    md = MultiDepthMap(channels.astype(np.float64), mask)
    if not md.is_sorted:
        raise ContractError(f"multi-depth channels in {path} are not sorted ascending")
    return md, inputs


def cmd_render_hr(args) -> int:
    scene = _resolve_scene(args.scene)
    cfg = _pipeline_config(args).with_background(scene.background)
    cam = _camera(scene, cfg, args.yaw)
    out = Path(args.out)
    inputs: list[Path] = []
    timings = {}
    if args.full_pipeline:
        res = run_pipeline(scene.field, scene.hr_field, cam, cfg)
        hr, cam_hr = res.hr, res.camera_hr
        timings.update({k.replace("_s", "_ms"): 1000.0 * v for k, v in res.timings.items()})
    else:
        md, inputs = _load_multi_depth(args, out)
        hr_res = cfg.hr_resolution
        if md.shape != (hr_res, hr_res):
            raise ContractError(f"multi-depth map is {md.shape[1]}x{md.shape[0]}, profile "
                                f"{args.profile} renders {hr_res}x{hr_res}")
        cam_hr = cam.with_resolution(hr_res, hr_res)
        try:
            hr = render_guided(scene.hr_field, cam_hr, md, cfg.guided)
        except ValueError as exc:
            raise ContractError(str(exc)) from None
        timings["render_hr_ms"] = 1000.0 * hr.stats["wall_time_s"]
    outputs = [out / "hr_color.png", out / "hr_color.pfm", out / "hr_alpha.pfm"]
    write_png(outputs[0], hr.color)
    write_pfm(outputs[1], hr.color)
    write_pfm(outputs[2], hr.alpha)
    report = {"guided": sample_budget_report(hr.stats)}
    if args.oracle:
        ref = render_oracle(scene.hr_field, cam_hr, cfg)
        write_png(out / "oracle_color.png", ref.color)
        write_pfm(out / "oracle_color.pfm", ref.color)
        outputs += [out / "oracle_color.png", out / "oracle_color.pfm"]
        report["dense"] = sample_budget_report(ref.stats)
        report["psnr"] = psnr(hr.color, ref.color)
        report["ssim"] = ssim(hr.color, ref.color)
        timings["oracle_ms"] = 1000.0 * ref.stats["wall_time_s"]
    config = {"scene": args.scene, "yaw": args.yaw, "full_pipeline": args.full_pipeline,
              "pipeline": _jsonable(cfg)}
    _write_manifest(out, "render-hr", config, inputs, outputs, timings)
    if args.report == "json":
        text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
        atomic_write_bytes(out / "render-hr.report.json", text.encode())
        sys.stdout.write(text)
    else:
        g = report["guided"]
        print(f"render-hr: {cam_hr.width}x{cam_hr.height}, {g['field_queries_per_pixel']:.3f} queries per "
              f"foreground pixel, {g['wall_time_ms']:.1f} ms")
        if args.oracle:
            print(f"  vs dense: PSNR {report['psnr']:.2f} dB, SSIM {report['ssim']:.4f}")
    return 0


def cmd_bench(args) -> int:
    names = [s.strip() for s in args.suite.split(",") if s.strip()] if args.suite else list(DEFAULT_SUITE)
    if not names:
        raise InputError("benchmark suite is empty")
    scenes = [_resolve_scene(n) for n in names]
    if args.runs < 1:
        raise InputError("--runs must be at least 1")
    cfg = _pipeline_config(args)
    out = Path(args.out)
    csv_path = out / "bench.csv"
    run_id = next_run_id(csv_path)
    rows = run_bench(scenes, cfg, runs=args.runs, run_id=run_id)
    append_csv(csv_path, rows)
    summary = {"schema": "depthguide.bench/1", "run_id": run_id, "profile": args.profile, "rows": rows}
    _write_json(out / f"bench_run{run_id}.json", summary)
    for r in rows:
        print(f"{r['scene']:>14}: dense {r['dense_ms']:9.1f} ms  guided {r['guided_ms']:8.1f} ms  "
              f"speedup {r['speedup']:6.1f}x  PSNR {r['psnr']:.2f} dB")
    return 0


def _line_chart(path: Path, xs, ys, label: str) -> None:
    from PIL import Image, ImageDraw

    w, h, pad = 480, 320, 40
    img = Image.new("RGB", (w, h), "white")
    draw = ImageDraw.Draw(img)
    finite = [y for y in ys if np.isfinite(y)] or [0.0]
    lo, hi = min(finite) - 1.0, max(finite) + 1.0
    x0, x1 = min(xs), max(xs)
    span = (x1 - x0) or 1.0

    def pt(x, y):
        y = min(max(y, lo), hi) if np.isfinite(y) else hi
        return (pad + (x - x0) / span * (w - 2 * pad), h - pad - (y - lo) / (hi - lo) * (h - 2 * pad))

    draw.rectangle([pad, pad, w - pad, h - pad], outline="black")
    pts = [pt(x, y) for x, y in zip(xs, ys)]
    if len(pts) > 1:
        draw.line(pts, fill=(200, 40, 40), width=2)
    for p in pts:
        draw.ellipse([p[0] - 3, p[1] - 3, p[0] + 3, p[1] + 3], fill=(200, 40, 40))
    draw.text((pad, 8), f"{label}  PSNR {lo + 1:.2f}..{hi - 1:.2f} dB vs yaw {x0:+.2f}..{x1:+.2f}", fill="black")
    path.parent.mkdir(parents=True, exist_ok=True)
    img.save(path, format="PNG")


def cmd_sweep(args) -> int:
    try:
        yaws = parse_yaw_spec(args.yaws)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if any(abs(y) >= np.pi for y in yaws):
        raise InputError("yaw angles must satisfy |yaw| < pi")
    scene = _resolve_scene(args.scene)
    cfg = _pipeline_config(args, **_sr_overrides(args)).with_background(scene.background)
    cam = _camera(scene, cfg, 0.0)
    report = consistency_sweep(scene.field, scene.hr_field, cam, yaws, cfg, scene.pivot, threads=1)
    report.meta["scene"] = scene.name
    out = Path(args.out)
    atomic_write_bytes(out / "sweep.json", report.to_json().encode())
    atomic_write_bytes(out / "sweep.csv", report.to_csv().encode())
    outputs = [out / "sweep.json", out / "sweep.csv"]
    if args.images:
        for i, yaw in enumerate(yaws):
            res = run_pipeline(scene.field, scene.hr_field, scene.camera_at(cfg.lr_resolution, yaw), cfg)
            p = out / f"sweep_view{i:02d}.png"
            write_png(p, res.hr.color)
            outputs.append(p)
    if args.plot:
        _line_chart(out / "sweep_psnr.png", yaws, report.psnr, scene.name)
        outputs.append(out / "sweep_psnr.png")
    config = {"scene": args.scene, "yaws": yaws, "pipeline": _jsonable(cfg)}
    _write_manifest(out, "sweep", config, [], outputs, {})
    print(f"sweep: {len(yaws)} views, mean PSNR {report.mean_psnr:.2f} dB, min {report.min_psnr:.2f} dB, "
          f"mean SSIM {report.mean_ssim:.4f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scene", default="sphere",
                        help=f"preset name ({', '.join(sorted(PRESETS))}) or scene JSON path")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="LR render seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for dense rendering")
    common.add_argument("--profile", choices=sorted(PROFILES), default="full",
                        help="resolution profile (LR -> HR)")
    common.add_argument("--yaw", type=float, default=0.0, help="camera yaw about the scene pivot (radians)")

    parser = argparse.ArgumentParser(prog="depthguide", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("render-lr", parents=[common], help="dense LR render: color, depth, normal, alpha")

    p = sub.add_parser("build-depth", parents=[common], help="LR maps to the sorted multi-depth map")
    p.add_argument("--depth", help="LR depth PFM (default OUT/lr_depth.pfm)")
    p.add_argument("--normal", help="LR normal PFM (default OUT/lr_normal.pfm)")
    p.add_argument("--alpha", help="LR alpha PFM (default OUT/lr_alpha.pfm if present, else all foreground)")
    p.add_argument("--se", type=int, help="structuring element half width (default 1, a 3x3 window)")
    p.add_argument("--eps-z", type=float, help="grazing threshold on the slope denominator")
    p.add_argument("--eps-g", type=float, help="flat-region gradient threshold")
    p.add_argument("--passes", type=int, help="number of 2x passes (default 2)")
    p.add_argument("--method", choices=["normal", "bilinear"])
    p.add_argument("--weighting", choices=["even", "softmax"])
    p.add_argument("--no-aggregate", action="store_true", help="skip erosion/dilation aggregation")

    p = sub.add_parser("render-hr", parents=[common], help="depth-guided HR render")
    p.add_argument("--multi-depth", help="multi-depth PFM (default OUT/multi_depth.pfm)")
    p.add_argument("--mask", help="foreground mask PFM (default next to the multi-depth map)")
    p.add_argument("--full-pipeline", action="store_true", help="run LR render and depth construction first")
    p.add_argument("--oracle", action="store_true", help="also render dense HR and report PSNR/SSIM")
    p.add_argument("--report", choices=["text", "json"], default="text")

    p = sub.add_parser("bench", parents=[common], help="dense vs guided HR timing and quality")
    p.add_argument("--suite", help=f"comma-separated scenes (default {','.join(DEFAULT_SUITE)})")
    p.add_argument("--runs", type=int, default=3, help="timed runs per scene (median reported)")

    p = sub.add_parser("sweep", parents=[common], help="yaw-sweep consistency against the dense oracle")
    p.add_argument("--yaws", default="-0.4:0.4:8", help="'start:end:count'")
    p.add_argument("--method", choices=["normal", "bilinear"])
    p.add_argument("--weighting", choices=["even", "softmax"])
    p.add_argument("--no-aggregate", action="store_true")
    p.add_argument("--images", action="store_true", help="write each view's guided render")
    p.add_argument("--plot", action="store_true", help="write a PSNR-vs-yaw line chart")
    return parser


COMMANDS = {
    "render-lr": cmd_render_lr,
    "build-depth": cmd_build_depth,
    "render-hr": cmd_render_hr,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
