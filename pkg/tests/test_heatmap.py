import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazecomp.errors import ShapeError
from gazecomp.heatmap import (
    GazePoint,
    GazeTrajectory,
    HeatmapStack,
    cell_center,
    cell_index,
    decode_peak,
    encode_gaussian,
    total_variation,
)

coords = st.floats(0.0, 1.0, allow_nan=False)


def one_point(x, y, valid=True):
    return GazeTrajectory.from_points([GazePoint(x, y, valid)])


def test_center_point_on_odd_grid():
    stack = encode_gaussian(one_point(0.5, 0.5), sigma=1.0, H=9, W=9)
    frame = stack.values[0]
    assert np.unravel_index(frame.argmax(), frame.shape) == (4, 4)
    assert abs(frame.sum() - 1.0) < 1e-9


def test_invalid_point_is_uniform():
    stack = encode_gaussian(one_point(0.0, 0.0, valid=False), H=4, W=5)
    np.testing.assert_array_equal(stack.values[0], np.full((4, 5), 1 / 20))


def test_full_grid_matches_direct_evaluation():
    stack = encode_gaussian(one_point(0.25, 0.75), sigma=2.0, H=8, W=8)
    # x = 0.25 -> column 2, y = 0.75 -> row 6
    rows, cols = np.mgrid[0:8, 0:8]
    g = np.exp(-((rows - 6) ** 2 + (cols - 2) ** 2) / (2 * 2.0**2))
    np.testing.assert_allclose(stack.values[0], g / g.sum(), rtol=1e-15, atol=0)


def test_decode_one_hot():
    v = np.zeros((1, 8, 8))
    v[0, 2, 3] = 1.0
    (x, y), = decode_peak(HeatmapStack(v)).xy
    assert (x, y) == ((3 + 0.5) / 8, (2 + 0.5) / 8)


def test_decode_uniform_breaks_ties_to_first_cell():
    (x, y), = decode_peak(HeatmapStack(np.full((1, 4, 4), 1 / 16))).xy
    assert (x, y) == (0.5 / 4, 0.5 / 4)


def test_coordinate_one_clamps_to_last_cell():
    assert cell_index(1.0, 1.0, 8, 8) == (7, 7)
    assert cell_index(0.0, 0.0, 8, 8) == (0, 0)


def test_roundtrip_200_random_points():
    rng = np.random.default_rng(0)
    xy = rng.random((200, 2))
    for H, W in ((8, 8), (16, 16), (5, 7)):
        dec = decode_peak(encode_gaussian(GazeTrajectory(xy), 2.0, H, W))
        r, c = cell_index(xy[:, 0], xy[:, 1], H, W)
        cx, cy = cell_center(r, c, H, W)
        np.testing.assert_array_equal(dec.xy, np.stack([cx, cy], axis=1))


@settings(max_examples=60, deadline=None)
@given(coords, coords, st.floats(0.3, 6.0), st.integers(2, 12), st.integers(2, 12))
def test_encoding_normalized_and_peaked_at_cell(x, y, sigma, H, W):
    stack = encode_gaussian(one_point(x, y), sigma, H, W)
    assert abs(stack.values.sum() - 1.0) < 1e-9
    assert stack.values.min() >= 0
    r, c = cell_index(x, y, H, W)
    assert stack.values[0].argmax() == r * W + c


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_decode_scale_invariant(scale):
    rng = np.random.default_rng(5)
    v = rng.random((3, 6, 6))
    a = decode_peak(HeatmapStack(v)).xy
    b = decode_peak(HeatmapStack(v * scale)).xy
    np.testing.assert_array_equal(a, b)


def test_total_variation_nonincreasing_in_sigma():
    rng = np.random.default_rng(1)
    sigmas = [0.5, 1.0, 1.5, 2.0, 3.0, 5.0]
    for _ in range(25):
        p, q = rng.random(2), rng.random(2)
        tv = [total_variation(encode_gaussian(one_point(*p), s, 12, 12).values[0],
                              encode_gaussian(one_point(*q), s, 12, 12).values[0]) for s in sigmas]
        assert all(a >= b - 1e-12 for a, b in zip(tv, tv[1:])), tv


def test_validation_errors():
    with pytest.raises(ValueError):
        GazeTrajectory(np.array([[1.2, 0.5]]))
    with pytest.raises(ValueError):
        GazeTrajectory(np.array([[np.nan, 0.5]]))
    with pytest.raises(ShapeError):
        GazeTrajectory(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        encode_gaussian(one_point(0.5, 0.5), sigma=0.0, H=4, W=4)
    with pytest.raises(ValueError):
        encode_gaussian(one_point(0.5, 0.5), H=1, W=4)


def test_invalid_coordinates_may_be_out_of_range():
    t = GazeTrajectory(np.array([[5.0, -1.0], [0.5, 0.5]]), np.array([False, True]))
    stack = encode_gaussian(t, 1.0, 4, 4)
    np.testing.assert_allclose(stack.frame_sums(), 1.0)


def test_trajectory_slice_keeps_absolute_offset():
    t = GazeTrajectory(np.random.default_rng(0).random((10, 2)), frame_offset=5)
    s = t.slice(2, 6)
    assert s.frame_offset == 7 and len(s) == 4
    np.testing.assert_array_equal(s.xy, t.xy[2:6])
    assert t.points[0] == GazePoint(*t.xy[0], True)
