from __future__ import annotations

import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from depthguide.dense import (RenderConfig, bin_weights, composite, compositing_weights, importance_samples,
                              render_dense, stratified_samples)
from depthguide.fields import VoxelGrid

densities = arrays(np.float64, st.integers(1, 40), elements=st.floats(0.0, 1e3))


@given(densities, st.floats(1e-4, 1.0))
def test_weights_and_transmittance_partition_unity(sigma, delta):
    w, t_final = compositing_weights(sigma, np.full(sigma.shape, delta))
    assert np.all(w >= 0)
    assert abs(w.sum() + t_final - 1.0) <= 1e-6


def test_homogeneous_medium_alpha_converges():
    n = 1024
    t = np.linspace(0.0, 1.0, n, endpoint=False)
    _, alpha = composite(np.ones(n), np.zeros(n), t, last_delta=1.0 / n)
    assert abs(alpha - (1.0 - np.exp(-1.0))) < 1e-3


def test_composite_values_and_background():
    t = np.array([0.0, 1.0])
    value, alpha = composite(np.array([0.0, 1e9]), np.array([[0.0, 0.0, 0.0], [1.0, 0.5, 0.0]]), t,
                             background=np.array([0.0, 0.0, 1.0]), last_delta=1.0)
    np.testing.assert_allclose(value, [1.0, 0.5, 0.0])
    assert alpha == pytest.approx(1.0)
    value, alpha = composite(np.zeros(2), np.zeros(2), t, background=0.25, last_delta=1.0)
    assert value == 0.25 and alpha == 0.0


def test_composite_rejects_bad_input():
    with pytest.raises(ValueError):
        composite(np.array([-1.0, 0.0]), np.zeros(2), np.array([0.0, 1.0]))
    with pytest.raises(ValueError):
        composite(np.zeros(2), np.zeros(2), np.array([1.0, 1.0]))


def test_stratified_one_sample_per_bin():
    t = stratified_samples(1.0, 5.0, 8, seed=3, shape=(100,))
    bins = np.floor((t - 1.0) / 0.5)
    np.testing.assert_array_equal(bins, np.broadcast_to(np.arange(8), (100, 8)))
    mid = stratified_samples(1.0, 5.0, 8, jitter=False)
    np.testing.assert_allclose(mid, 1.25 + 0.5 * np.arange(8))


def test_importance_concentrates_on_weighted_bin():
    w = np.zeros(10)
    w[6] = 1.0
    t = importance_samples(0.0, 10.0, w, 50, seed=0)
    assert np.all((t >= 6.0) & (t <= 7.0))


def test_importance_deterministic_levels():
    w = np.array([1.0, 3.0])
    t = importance_samples(0.0, 2.0, w, 4, jitter=False)
    # CDF levels 1/8, 3/8, 5/8, 7/8 against cdf (0.25, 1.0)
    np.testing.assert_allclose(t, [0.5, 1.0 + 0.125 / 0.75, 1.0 + 0.375 / 0.75, 1.0 + 0.625 / 0.75])


def test_importance_zero_weights_fall_back_to_stratified():
    t = importance_samples(0.0, 4.0, np.zeros(4), 4, jitter=False)
    np.testing.assert_allclose(t, [0.5, 1.5, 2.5, 3.5])
    with pytest.raises(ValueError):
        importance_samples(0.0, 1.0, -np.ones(3), 2)


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(0.0, 1.0)))
def test_bin_weights_cover_next_sample(w):
    b = bin_weights(w)
    assert np.all(b >= w)
    assert np.all(b[:-1] >= w[1:])
    assert b[-1] == w[-1]


def test_dense_query_budget_and_camera_depth(frontal_camera, wall_scene):
    out = render_dense(wall_scene, frontal_camera, RenderConfig(jitter=False))
    assert out.stats["field_queries"] == 72 * 16 * 16
    assert out.stats["queries_per_pixel"] == 72.0
    assert np.all(out.mask)
    # the wall is at camera-z 3 for every pixel, not at ray distance
    np.testing.assert_allclose(out.surface_depth(), 3.0, atol=5e-3)
    np.testing.assert_allclose(out.normal[..., 2], 1.0, atol=1e-6)
    np.testing.assert_allclose(out.color, np.broadcast_to([0.2, 0.6, 0.4], out.color.shape), atol=1e-6)


def test_dense_background_and_alpha(frontal_camera, sphere_scene):
    cfg = RenderConfig(background=(0.0, 0.0, 1.0))
    out = render_dense(sphere_scene, frontal_camera, cfg)
    assert out.alpha[0, 0] < 1e-6
    np.testing.assert_allclose(out.color[0, 0], [0.0, 0.0, 1.0], atol=1e-6)
    assert out.alpha[8, 8] > 0.999
    assert np.all((out.alpha >= 0) & (out.alpha <= 1))
    assert out.surface_depth()[0, 0] == frontal_camera.far


def test_dense_is_deterministic_and_thread_independent(frontal_camera, sphere_scene):
    a = render_dense(sphere_scene, frontal_camera, RenderConfig(seed=5))
    b = render_dense(sphere_scene, frontal_camera, RenderConfig(seed=5, threads=3))
    for name in ("color", "depth", "normal", "alpha"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    c = render_dense(sphere_scene, frontal_camera, RenderConfig(seed=6))
    assert a.depth.tobytes() != c.depth.tobytes()


def test_no_importance_pass():
    grid = VoxelGrid(np.full((2, 2, 2, 4), 0.5))
    from depthguide.camera import look_at
    cam = look_at((0, 0, 3), (0, 0, 0), width=4, height=4, near=1.0, far=5.0)
    out = render_dense(grid, cam, RenderConfig(n_importance=0, compute_normals=False))
    assert out.stats["queries_per_pixel"] == 36


def test_render_config_validation():
    with pytest.raises(ValueError):
        RenderConfig(n_uniform=1)
    with pytest.raises(ValueError):
        dataclasses.replace(RenderConfig(), threads=0)
