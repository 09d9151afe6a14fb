from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from depthguide.cli import MANIFEST_SCHEMA, main
from depthguide.io import read_pfm, sha256_file, write_pfm

FAST = ["--profile", "desk64"]


@pytest.fixture(scope="module")
def lr_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("lr")
    assert main(["render-lr", "--scene", "sphere", "--out", str(out), *FAST]) == 0
    return out


def test_render_lr_outputs_and_manifest(lr_dir):
    for name in ("lr_color.png", "lr_color.pfm", "lr_depth.pfm", "lr_normal.pfm", "lr_alpha.pfm"):
        assert (lr_dir / name).is_file()
    assert read_pfm(lr_dir / "lr_depth.pfm").shape == (64, 64)
    m = json.loads((lr_dir / "render-lr.manifest.json").read_text())
    assert m["schema"] == MANIFEST_SCHEMA
    assert len(m["config_hash"]) == 64
    assert m["outputs"]["lr_depth.pfm"] == sha256_file(lr_dir / "lr_depth.pfm")
    assert m["timings"]["field_queries"] == 72 * 64 * 64


def test_render_lr_is_byte_deterministic(lr_dir, tmp_path):
    assert main(["render-lr", "--scene", "sphere", "--out", str(tmp_path), "--threads", "2", *FAST]) == 0
    for name in ("lr_color.pfm", "lr_depth.pfm", "lr_normal.pfm", "lr_alpha.pfm", "lr_color.png"):
        assert (tmp_path / name).read_bytes() == (lr_dir / name).read_bytes()
    a = json.loads((tmp_path / "render-lr.manifest.json").read_text())
    b = json.loads((lr_dir / "render-lr.manifest.json").read_text())
    assert a["outputs"] == b["outputs"]


def test_invalid_scene_exits_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["render-lr", "--scene", str(tmp_path / "missing.json"), "--out", str(out), *FAST]) == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["render-lr", "--scene", str(tmp_path / "bad.json"), "--out", str(out), *FAST]) == 2
    assert not out.exists()


def test_build_and_render_hr(lr_dir, tmp_path):
    for name in ("lr_depth.pfm", "lr_normal.pfm", "lr_alpha.pfm"):
        (tmp_path / name).write_bytes((lr_dir / name).read_bytes())
    assert main(["build-depth", "--out", str(tmp_path), *FAST]) == 0
    md = read_pfm(tmp_path / "multi_depth.pfm")
    assert md.shape == (256, 256, 3)
    assert np.all(np.diff(md, axis=-1) >= 0)
    assert main(["render-hr", "--out", str(tmp_path), "--report", "json", *FAST]) == 0
    report = json.loads((tmp_path / "render-hr.report.json").read_text())
    assert report["guided"]["field_queries_per_pixel"] == 3.0
    assert read_pfm(tmp_path / "hr_color.pfm").shape == (256, 256, 3)


def test_full_pipeline_with_oracle(tmp_path):
    assert main(["render-hr", "--full-pipeline", "--oracle", "--report", "json", "--out", str(tmp_path),
                 *FAST]) == 0
    report = json.loads((tmp_path / "render-hr.report.json").read_text())
    assert report["guided"]["field_queries_per_pixel"] == 3.0
    assert report["dense"]["field_queries_per_pixel"] == 72.0
    assert np.isfinite(report["psnr"]) and -1 <= report["ssim"] <= 1
    assert (tmp_path / "oracle_color.png").is_file()


def _lr_maps(tmp_path, depth, normal=None, alpha=None):
    write_pfm(tmp_path / "lr_depth.pfm", depth)
    if normal is not None:
        write_pfm(tmp_path / "lr_normal.pfm", normal)
    if alpha is not None:
        write_pfm(tmp_path / "lr_alpha.pfm", alpha)


def test_build_depth_constant_disc(tmp_path):
    flat = np.broadcast_to(np.float32([0, 0, 1]), (16, 16, 3))
    _lr_maps(tmp_path, np.full((16, 16), 2.5, np.float32), flat)
    assert main(["build-depth", "--out", str(tmp_path), *FAST]) == 0
    md = read_pfm(tmp_path / "multi_depth.pfm")
    assert md.shape == (64, 64, 3)
    np.testing.assert_array_equal(md[..., 0], md[..., 2])
    np.testing.assert_allclose(md, 2.5)


def test_build_depth_step_keeps_both_sides(tmp_path):
    d = np.full((16, 16), 3.5, np.float32)
    d[:, :8] = 2.75
    flat = np.broadcast_to(np.float32([0, 0, 1]), (16, 16, 3))
    _lr_maps(tmp_path, d, flat, np.ones((16, 16), np.float32))
    assert main(["build-depth", "--out", str(tmp_path), "--se", "1", *FAST]) == 0
    md = read_pfm(tmp_path / "multi_depth.pfm")
    near_edge = md[:, 28:36]
    np.testing.assert_allclose(near_edge[..., 0], 2.75, atol=1e-6)
    np.testing.assert_allclose(near_edge[..., 2], 3.5, atol=1e-6)
    assert set(np.unique(md)) <= {np.float32(2.75), np.float32(3.5)}


def test_build_depth_contract_errors(tmp_path):
    _lr_maps(tmp_path, np.ones((8, 8), np.float32))
    assert main(["build-depth", "--out", str(tmp_path), *FAST]) == 3  # no normal map
    _lr_maps(tmp_path, np.ones((8, 8), np.float32), np.zeros((4, 4, 3), np.float32))
    assert main(["build-depth", "--out", str(tmp_path), *FAST]) == 3  # resolution mismatch
    assert not (tmp_path / "multi_depth.pfm").exists()


def test_render_hr_contract_errors(tmp_path):
    assert main(["render-hr", "--out", str(tmp_path), *FAST]) == 3
    bad = np.ones((256, 256, 3), np.float32)
    bad[..., 0] = 5.0
    write_pfm(tmp_path / "multi_depth.pfm", bad)
    assert main(["render-hr", "--out", str(tmp_path), *FAST]) == 3
    write_pfm(tmp_path / "multi_depth.pfm", np.ones((32, 32, 3), np.float32))
    assert main(["render-hr", "--out", str(tmp_path), *FAST]) == 3


def test_bench_appends_runs(tmp_path):
    args = ["bench", "--suite", "sphere", "--runs", "1", "--out", str(tmp_path), *FAST]
    assert main(args) == 0
    assert main(args) == 0
    with open(tmp_path / "bench.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["run_id"] for r in rows] == ["1", "2"]
    summary = json.loads((tmp_path / "bench_run2.json").read_text())
    assert summary["rows"][0]["scene"] == "sphere"
    assert main(["bench", "--suite", ",", "--out", str(tmp_path), *FAST]) == 2


def test_sweep(tmp_path):
    assert main(["sweep", "--yaws", "0:0:1", "--plot", "--images", "--out", str(tmp_path), *FAST]) == 0
    report = json.loads((tmp_path / "sweep.json").read_text())
    assert report["summary"]["views"] == 1
    assert (tmp_path / "sweep_psnr.png").is_file() and (tmp_path / "sweep_view00.png").is_file()
    assert main(["sweep", "--yaws=-0.4:0.4", "--out", str(tmp_path / "x"), *FAST]) == 2
    assert not (tmp_path / "x").exists()


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["render-lr", "--profile", "giant"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
