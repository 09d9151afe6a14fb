from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthguide.camera import look_at
from depthguide.morphology import StructuringElement
from depthguide.normal_sr import (MultiDepthMap, SRConfig, bilinear2x, build_multi_depth, gradients_from_normals,
                                  parent_index, sr_weights, upsample2x)

# slope/footprint stays below 10, so N_z > 0.07 and no pixel is flagged as grazing
slopes = st.floats(-0.25, 0.25)


def _plane(gx, gy, h, w, c=5.0, scale=1.0):
    """Depth of a linear ramp sampled at pixel centers, in input-pixel units divided by ``scale``."""
    x = (np.arange(w) + 0.5) / scale
    y = (np.arange(h) + 0.5) / scale
    return c + gx * x[None, :] + gy * y[:, None]


def _plane_normals(gx, gy, footprint, shape):
    n = np.array([gx / footprint, -gy / footprint, 1.0])
    return np.broadcast_to(n / np.linalg.norm(n), shape + (3,))


@given(slopes, slopes, st.floats(0.025, 0.05))
def test_plane_exactness_two_passes(gx, gy, footprint):
    h, w = 6, 7
    d = _plane(gx, gy, h, w)
    n = _plane_normals(gx, gy, footprint, (h, w))
    md = build_multi_depth(d, n, np.ones((h, w)), config=SRConfig(aggregate=False), footprint=footprint)
    expected = _plane(gx, gy, 4 * h, 4 * w, scale=4.0)
    for c in range(3):
        np.testing.assert_allclose(md.channels[..., c], expected, atol=1e-5, rtol=0)


@given(slopes, slopes)
def test_plane_exactness_single_pass_with_aggregation(gx, gy):
    h, w, fp = 5, 5, 0.02
    d = _plane(gx, gy, h, w)
    n = _plane_normals(gx, gy, fp, (h, w))
    md = build_multi_depth(d, n, np.ones((h, w)), config=SRConfig(passes=1), footprint=fp)
    np.testing.assert_allclose(md.channels[..., 1], _plane(gx, gy, 2 * h, 2 * w, scale=2.0), atol=1e-5)


@given(st.floats(-50, 50), st.floats(-50, 50), st.booleans(), st.booleans(),
       st.sampled_from(["even", "softmax"]))
def test_weight_partition(dx, dy, fx, fy, weighting):
    wx, wy = sr_weights(dx, dy, fx, fy, weighting)
    assert abs(abs(wx) + abs(wy) - 1.0) <= 1e-12
    assert (wx <= 0) == fx or wx == 0
    assert (wy <= 0) == fy or wy == 0


def test_softmax_favours_smaller_gradient():
    wx, wy = sr_weights(0.1, 2.0, False, False, "softmax")
    assert wx > wy
    np.testing.assert_allclose(wx, np.exp(-0.1) / (np.exp(-0.1) + np.exp(-2.0)))
    with pytest.raises(ValueError):
        sr_weights(0.0, 0.0, False, False, "max")


def test_parent_index_one_based():
    np.testing.assert_array_equal(parent_index(np.arange(1, 7)), [1, 1, 2, 2, 3, 3])


def test_grazing_pixels_get_zero_gradient():
    n = np.array([[[1.0, 0.0, 0.01], [0.0, 0.0, 1.0]]])
    g = gradients_from_normals(n, 0.1, eps_z=0.05)
    np.testing.assert_array_equal(g.grazing, [[True, False]])
    assert g.dx[0, 0] == 0.0
    with pytest.raises(ValueError):
        gradients_from_normals(n, 0.0)


def test_perspective_denominator_matches_nz_on_axis():
    n = np.array([[[0.3, -0.2, 0.9]]])
    a = gradients_from_normals(n, 0.1)
    b = gradients_from_normals(n, 0.1, view_dirs=np.array([[[0.0, 0.0, -1.0]]]))
    np.testing.assert_allclose([a.dx, a.dy], [b.dx, b.dy])


def test_flat_region_copies_parent():
    d = np.array([[1.0, 2.0]])
    g = gradients_from_normals(np.broadcast_to([0.0, 0.0, 1.0], (1, 2, 3)), 0.1)
    np.testing.assert_array_equal(upsample2x(d, g), [[1.0, 1.0, 2.0, 2.0], [1.0, 1.0, 2.0, 2.0]])


def test_upsample_shape_errors():
    g = gradients_from_normals(np.broadcast_to([0.0, 0.0, 1.0], (2, 2, 3)), 0.1)
    with pytest.raises(ValueError):
        upsample2x(np.zeros((3, 3)), g)


def test_bilinear2x_is_exact_on_interior_ramps():
    d = _plane(0.2, -0.1, 6, 6)
    up = bilinear2x(d)
    np.testing.assert_allclose(up[1:-1, 1:-1], _plane(0.2, -0.1, 12, 12, scale=2.0)[1:-1, 1:-1], atol=1e-12)
    assert np.all(bilinear2x(np.full((3, 3), 4.0)) == 4.0)


def _step(h=8, w=8, d1=2.0, d2=3.0):
    d = np.full((h, w), d2)
    d[:, : w // 2] = d1
    return d


@pytest.mark.parametrize("method", ["normal", "bilinear"])
def test_multi_depth_sorted_and_scaled(method):
    d = _step()
    n = np.broadcast_to([0.0, 0.0, 1.0], d.shape + (3,))
    md = build_multi_depth(d, n, np.ones(d.shape), config=SRConfig(method=method), footprint=0.01)
    assert md.channels.shape == (32, 32, 3)
    assert md.is_sorted
    assert md.mask.shape == (32, 32) and md.mask.all()


def test_normal_guided_step_does_not_blend():
    d = _step()
    n = np.broadcast_to([0.0, 0.0, 1.0], d.shape + (3,))
    md = build_multi_depth(d, n, np.ones(d.shape), footprint=0.01)
    assert set(np.unique(md.channels)) <= {2.0, 3.0}
    # HR pixels within one LR pixel of the edge carry both sides
    edge = md.channels[:, 12:20]
    assert np.all(edge[..., 0] == 2.0) and np.all(edge[..., 2] == 3.0)
    bl = build_multi_depth(d, n, np.ones(d.shape), config=SRConfig(method="bilinear"))
    assert len(np.unique(bl.channels)) > 2


def test_background_gets_sentinel_and_mask():
    cam = look_at((0, 0, 3), (0, 0, 0), width=6, height=6, near=0.5, far=6.0)
    d = np.full((6, 6), 3.0)
    a = np.zeros((6, 6))
    a[2:4, 2:4] = 1.0
    n = np.broadcast_to([0.0, 0.0, 1.0], (6, 6, 3))
    md = build_multi_depth(d, n, a, camera=cam)
    assert md.channels[0, 0, 0] == cam.far
    assert md.mask.sum() == 16 * 16  # 4x4 LR region after dilation, times 16
    assert not md.mask[0, 0]


def test_channel_normals_follow_their_depth_source():
    # near side is a tilted ramp, far side a flat wall; the eroded channel on the
    # far side must continue the ramp, not use the wall's flat normal
    fp = 0.02
    h, w = 4, 8
    gx = 0.1
    d = _plane(gx, 0.0, h, w)
    d[:, 4:] = 9.0
    n = np.array(_plane_normals(gx, 0.0, fp, (h, w)))
    n[:, 4:] = [0.0, 0.0, 1.0]
    md = build_multi_depth(d, n, np.ones((h, w)), config=SRConfig(passes=1), footprint=fp)
    # LR column 4 erodes to the ramp value at column 3, offset with the ramp's slope
    ramp_x3 = d[0, 3]
    np.testing.assert_allclose(md.channels[0, 8, 0], ramp_x3 - 0.25 * gx, atol=1e-12)
    np.testing.assert_allclose(md.channels[0, 9, 0], ramp_x3 + 0.25 * gx, atol=1e-12)
    shared = build_multi_depth(d, n, np.ones((h, w)), config=SRConfig(passes=1, channel_normals=False),
                               footprint=fp)
    assert shared.channels[0, 8, 0] == shared.channels[0, 9, 0] == ramp_x3


def test_input_validation():
    with pytest.raises(ValueError):
        build_multi_depth(np.ones((2, 2)), np.zeros((2, 2, 3)), np.ones((3, 3)), footprint=0.1)
    with pytest.raises(ValueError):
        build_multi_depth(np.ones((2, 2)), np.zeros((2, 2, 3)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        SRConfig(method="cubic")
    with pytest.raises(ValueError):
        SRConfig(passes=0)


def test_multi_depth_map_sorted_flag():
    assert not MultiDepthMap(np.array([[[2.0, 1.0, 3.0]]]), np.ones((1, 1), bool)).is_sorted
