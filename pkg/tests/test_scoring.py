import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gazecomp.errors import AlignmentError, ShapeError
from gazecomp.evaluation import roc_auc
from gazecomp.heatmap import GazeTrajectory, HeatmapStack, cell_index
from gazecomp.scoring import (
    ScoreRecord,
    dtw_cost,
    heatmap_entropy,
    late_fuse,
    minmax_normalize,
    score_dtw,
    score_entropy,
    score_euclidean,
    score_heatmap,
    score_window,
)
from gazecomp.testkit import dtw_bruteforce

traj_arrays = arrays(np.float64, st.tuples(st.integers(1, 6), st.just(2)), elements=st.floats(0, 1))


def T(xy, valid=None):
    return GazeTrajectory(np.asarray(xy, dtype=float), valid)


def one_hot_stack(traj, H, W):
    v = np.zeros((len(traj), H, W))
    r, c = cell_index(traj.xy[:, 0], traj.xy[:, 1], H, W)
    v[np.arange(len(traj)), r, c] = 1.0
    return HeatmapStack(v)


# -- euclidean ---------------------------------------------------------------

def test_euclidean_identity_is_zero():
    t = T(np.random.default_rng(0).random((4, 2)))
    assert score_euclidean(t, t).score == 0.0


def test_euclidean_345_triangle():
    r = score_euclidean(T([(0, 0), (0, 0)]), T([(0, 0), (0.3, 0.4)]))
    assert r.score == pytest.approx(0.5, abs=1e-15) and r.frames_used == 2


def test_euclidean_matches_per_point_sum():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a, b = rng.random((4, 2)), rng.random((4, 2))
        expected = sum(math.hypot(*(a[i] - b[i])) for i in range(4))
        assert score_euclidean(T(a), T(b)).score == pytest.approx(expected, abs=1e-14)


def test_euclidean_skips_invalid_gt_frames():
    r = score_euclidean(T([(0, 0), (0.9, 0.9)], [True, False]), T([(0, 0.1), (0, 0)]))
    assert r.score == pytest.approx(0.1) and r.frames_used == 1


def test_euclidean_length_mismatch():
    with pytest.raises(ShapeError):
        score_euclidean(T([(0, 0)]), T([(0, 0), (1, 1)]))


# -- dtw ---------------------------------------------------------------------

def test_dtw_fixture():
    r = score_dtw(T([(0, 0), (0.2, 0)]), T([(0, 0), (0.1, 0), (0.2, 0)]))
    assert r.score == pytest.approx(0.1, abs=1e-15)


def test_dtw_matches_bruteforce_on_random_pairs():
    rng = np.random.default_rng(2)
    for _ in range(200):
        a = rng.random((rng.integers(1, 7), 2))
        b = rng.random((rng.integers(1, 7), 2))
        assert dtw_cost(a, b) == dtw_bruteforce(a, b).value


@settings(max_examples=60, deadline=None)
@given(traj_arrays, traj_arrays)
def test_dtw_symmetric_and_bounded_by_euclidean(a, b):
    assert dtw_cost(a, b) == pytest.approx(dtw_cost(b, a), abs=1e-12)
    if len(a) == len(b):
        assert dtw_cost(a, b) <= score_euclidean(T(a), T(b)).score + 1e-12


@settings(max_examples=40, deadline=None)
@given(traj_arrays)
def test_dtw_and_euclidean_zero_on_identity(a):
    assert dtw_cost(a, a) == 0.0
    assert score_euclidean(T(a), T(a)).score == 0.0


def test_dtw_absent_when_gt_all_invalid():
    r = score_dtw(T([(0, 0), (0, 0)], [False, False]), T([(0.5, 0.5), (0.5, 0.5)]), timestep=9)
    assert r.absent and r.score is None and r.timestep == 9


def test_dtw_empty_prediction_rejected():
    with pytest.raises(ValueError):
        score_dtw(T([(0, 0)]), T([(0, 0)], [False]))


# -- heatmap likelihood --------------------------------------------------------

def test_heatmap_one_hot_at_gt_gives_minimum():
    gt = T(np.random.default_rng(3).random((4, 2)))
    r = score_heatmap(gt, one_hot_stack(gt, 8, 8))
    assert r.score == -4.0 and r.raw == 4.0


def test_heatmap_uniform_4x4():
    gt = T(np.random.default_rng(4).random((4, 2)))
    r = score_heatmap(gt, HeatmapStack(np.full((4, 4, 4), 1 / 16)))
    assert r.score == -0.25 and r.raw == 0.25


def test_heatmap_matches_cell_lookup():
    rng = np.random.default_rng(5)
    for _ in range(20):
        gt = T(rng.random((4, 2)))
        v = rng.random((4, 6, 5))
        v /= v.sum(axis=(1, 2), keepdims=True)
        r, c = cell_index(gt.xy[:, 0], gt.xy[:, 1], 6, 5)
        expected = math.fsum(v[i, r[i], c[i]] for i in range(4))
        assert score_heatmap(gt, HeatmapStack(v)).score == -expected


def test_heatmap_aligns_with_last_frames():
    gt = T([(0.1, 0.1), (0.9, 0.9)])
    v = np.zeros((4, 2, 2))
    v[:, 0, 0] = 1.0  # first two frames would match gt[0]
    v[2, 0, 0], v[3, 1, 1] = 1.0, 1.0
    assert score_heatmap(gt, HeatmapStack(v)).raw == 2.0


def test_heatmap_monotone_when_mass_moves_to_gt():
    rng = np.random.default_rng(6)
    gt = T(rng.random((3, 2)))
    v = rng.random((3, 5, 5))
    v /= v.sum(axis=(1, 2), keepdims=True)
    r, c = cell_index(gt.xy[:, 0], gt.xy[:, 1], 5, 5)
    before = score_heatmap(gt, HeatmapStack(v)).score
    w = v.copy()
    w[0] *= 0.5
    w[0, r[0], c[0]] += 0.5
    assert score_heatmap(gt, HeatmapStack(w)).score <= before


def test_heatmap_index_out_of_range():
    with pytest.raises(IndexError):
        score_heatmap(T(np.zeros((4, 2))), HeatmapStack(np.full((2, 2, 2), 0.25)))


# -- entropy -----------------------------------------------------------------

def test_entropy_fixtures():
    assert score_entropy(HeatmapStack(np.full((2, 4, 4), 1 / 16))).score == 4.0
    oh = np.zeros((3, 4, 4))
    oh[:, 1, 2] = 1.0
    assert score_entropy(HeatmapStack(oh)).score == 0.0
    assert heatmap_entropy(np.array([[0.5, 0.5], [0.0, 0.0]])) == 1.0


def test_entropy_unnormalized_rejected():
    with pytest.raises(ValueError):
        score_entropy(HeatmapStack(np.full((1, 2, 2), 0.3)))


def test_entropy_maximized_by_uniform():
    rng = np.random.default_rng(7)
    for _ in range(50):
        v = rng.random((1, 4, 4)) ** 3
        v /= v.sum()
        assert score_entropy(HeatmapStack(v)).score <= 4.0


# -- shared polarity and dispatch ----------------------------------------------

@pytest.mark.parametrize("fid", ["euclidean", "dtw", "heatmap", "entropy"])
def test_polarity_perfect_below_wrong(fid):
    gt = T([(0.1, 0.1), (0.15, 0.1), (0.1, 0.15), (0.12, 0.12)])
    wrong = T([(0.9, 0.9)] * 4)
    perfect_q = one_hot_stack(gt, 8, 8)
    wrong_q = HeatmapStack(np.full((4, 8, 8), 1 / 64))
    good = score_window(fid, gt, gt, perfect_q, 1).score
    bad = score_window(fid, gt, wrong, wrong_q, 1).score
    assert good < bad


def test_unknown_function():
    with pytest.raises(ValueError):
        score_window("cosine", T([(0, 0)]), T([(0, 0)]), HeatmapStack(np.full((1, 2, 2), 0.25)))


def test_record_roundtrip():
    r = ScoreRecord(12, -0.3, "heatmap", 4, raw=0.3)
    assert ScoreRecord.from_dict(r.to_dict()) == r


# -- late fusion -------------------------------------------------------------

def recs(scores, fid="x"):
    return [ScoreRecord(t + 1, s, fid, 4) for t, s in enumerate(scores)]


def test_minmax_zero_range():
    np.testing.assert_array_equal(minmax_normalize([3.0, 3.0]), [0.0, 0.0])


def test_late_fusion_hand_computed():
    a = recs([0.0, 1.0, 2.0, 4.0])
    b = recs([10.0, 30.0, 20.0, 10.0])
    fused = [r.score for r in late_fuse(a, b)]
    expected = [(0 + 0) / 2, (0.25 + 1) / 2, (0.5 + 0.5) / 2, (1 + 0) / 2]
    np.testing.assert_allclose(fused, expected, rtol=0, atol=1e-15)


def test_late_fusion_with_self_keeps_auc():
    rng = np.random.default_rng(8)
    s = rng.random(60)
    y = (rng.random(60) < 0.4).astype(int)
    fused = [r.score for r in late_fuse(recs(s), recs(s))]
    assert roc_auc(fused, y) == roc_auc(s, y)


def test_late_fusion_constant_stream_keeps_ranking():
    s = np.random.default_rng(9).random(30)
    fused = [r.score for r in late_fuse(recs(s), recs(np.full(30, 7.0)))]
    np.testing.assert_array_equal(np.argsort(fused), np.argsort(s))


def test_late_fusion_misaligned():
    with pytest.raises(AlignmentError):
        late_fuse(recs([1, 2]), [ScoreRecord(5, 1.0, "x", 4), ScoreRecord(6, 1.0, "x", 4)])


def test_late_fusion_absent_propagates():
    a = recs([1.0, 2.0, 3.0])
    b = recs([1.0, 2.0, 3.0])
    b[1] = ScoreRecord(2, None, "x", 0, absent=True)
    out = late_fuse(a, b)
    assert out[1].absent and not out[0].absent
