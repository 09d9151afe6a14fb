from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from skimage.metrics import structural_similarity

from depthguide.metrics import (ConsistencyReport, consistency_sweep, depth_rmse, interior_mask, parse_yaw_spec,
                                psnr, silhouette_band, ssim, to_luma)
from depthguide.pipeline import PipelineConfig
from depthguide.scenes import preset


def test_psnr_worked_examples():
    a = np.zeros((4, 4))
    assert psnr(a, a + 0.1) == pytest.approx(20.0)
    assert psnr(a, a + 0.01) == pytest.approx(40.0)
    assert psnr(a, a + 10.0, peak=100.0) == pytest.approx(20.0)
    assert psnr(a, a) == math.inf


def test_psnr_mask_and_errors():
    a = np.zeros((2, 2))
    b = np.array([[0.1, 1.0], [1.0, 1.0]])
    m = np.array([[True, False], [False, False]])
    assert psnr(a, b, mask=m) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        psnr(a, np.zeros((3, 3)))
    with pytest.raises(ValueError):
        psnr(a, b, mask=np.zeros((2, 2), bool))


@given(st.integers(0, 10_000))
def test_ssim_matches_skimage(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((24, 20))
    b = np.clip(a + 0.2 * rng.normal(size=a.shape), 0, 1)
    ref = structural_similarity(a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
                                data_range=1.0)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-10)


def test_ssim_color_uses_luma():
    rng = np.random.default_rng(3)
    a = rng.random((16, 16, 3))
    b = rng.random((16, 16, 3))
    ref = structural_similarity(to_luma(a), to_luma(b), gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False, data_range=1.0)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-10)
    assert ssim(a, a) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ssim(np.zeros((5, 5)), np.zeros((5, 5)))


def test_luma_weights():
    np.testing.assert_allclose(to_luma(np.ones((1, 1, 3))), [[1.0]])
    with pytest.raises(ValueError):
        to_luma(np.zeros((2, 2, 4)))


def test_depth_rmse():
    assert depth_rmse(np.zeros(4), np.array([1.0, -1.0, 1.0, -1.0])) == 1.0
    assert depth_rmse(np.zeros(2), np.array([3.0, 9.0]), mask=np.array([True, False])) == 3.0


def test_silhouette_band_and_interior():
    d = np.full((12, 12), 3.0)
    d[:, 6:] = 4.0
    band = silhouette_band(d, radius=2)
    # the jump sits between columns 5 and 6; the 3x3 spread flags 5 and 6, dilation adds 2 each way
    np.testing.assert_array_equal(np.flatnonzero(band[0]), np.arange(3, 9))
    m = np.zeros((12, 12), bool)
    m[2:10, 2:10] = True
    inner = interior_mask(m, np.full((12, 12), 3.0), radius=1)
    np.testing.assert_array_equal(np.argwhere(inner).min(0), [4, 4])
    np.testing.assert_array_equal(np.argwhere(inner).max(0), [7, 7])


def test_parse_yaw_spec():
    assert parse_yaw_spec("-0.4:0.4:8")[0] == -0.4
    assert len(parse_yaw_spec("-0.4:0.4:8")) == 8
    assert parse_yaw_spec("0:0:1") == [0.0]
    for bad in ("1:2", "a:b:c", "0:1:0", "0:1:1"):
        with pytest.raises(ValueError):
            parse_yaw_spec(bad)


def test_report_roundtrip_and_validation():
    r = ConsistencyReport([0.0, 0.1], [30.0, math.inf], [0.9, 1.0], [{"k": 1}, {"k": 2}], {"scene": "x"})
    d = json.loads(r.to_json())
    assert d["summary"]["mean_psnr"] == "inf"
    back = ConsistencyReport.from_dict(d)
    assert back.psnr == r.psnr and back.views == r.views
    assert r.to_csv().splitlines()[0] == "schema,yaw,psnr,ssim,k"
    with pytest.raises(ValueError):
        ConsistencyReport([0.0], [1.0], [1.5])
    with pytest.raises(ValueError):
        ConsistencyReport.from_dict({"schema": "other"})


def test_sweep_small_scene():
    scene = preset("sphere")
    cfg = PipelineConfig(lr_resolution=16).with_background(scene.background)
    cache = {}
    cam = scene.camera_at(16)
    r = consistency_sweep(scene.field, scene.hr_field, cam, [0.0, 0.2], cfg, scene.pivot, oracle_cache=cache)
    assert len(r.psnr) == 2 and len(cache) == 2
    assert all(v["queries_per_foreground_pixel"] == 3.0 for v in r.views)
    again = consistency_sweep(scene.field, scene.hr_field, cam, [0.0, 0.2], cfg, scene.pivot,
                              oracle_cache=cache, threads=2)
    assert again.psnr == r.psnr
    with pytest.raises(ValueError):
        consistency_sweep(scene.field, scene.hr_field, cam, [], cfg)
