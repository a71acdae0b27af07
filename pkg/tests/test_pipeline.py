import numpy as np
import pytest

from gazecomp.errors import AlignmentError, ConfigMismatchError
from gazecomp.heatmap import GazeTrajectory
from gazecomp.model import CompletionModel
from gazecomp.pipeline import (
    ScoreStream,
    StreamingDetector,
    detect,
    detect_multi,
    extract_windows,
    label_stream,
    pooled_pairs,
    window_count,
)
from gazecomp.scoring import ScoreRecord
from gazecomp.synthetic import SessionRecord

from gradcases import tiny_model_config


def make_session(L=12, C=1, H=2, W=2, seed=0, valid=None, labels=None):
    rng = np.random.default_rng(seed)
    return SessionRecord("s", rng.random((L, C, H, W)).astype(np.float32),
                         GazeTrajectory(rng.random((L, 2)), valid),
                         labels if labels is not None else rng.integers(0, 2, L))


@pytest.fixture(scope="module")
def model():
    return CompletionModel(tiny_model_config("both", F=4), 0)


@pytest.mark.parametrize("L,F,stride", [(12, 4, 1), (12, 4, 3), (13, 4, 2), (4, 4, 1), (3, 4, 1), (20, 6, 5)])
def test_window_count_formula(L, F, stride):
    wins = extract_windows(make_session(L), F, stride)
    assert len(wins) == window_count(L, F, stride) == (0 if L < F else (L - F) // stride + 1)
    assert [w.window_end for w in wins] == list(range(F, L + 1, stride))[:len(wins)]


def test_window_contents_and_halves():
    s = make_session(10)
    w = extract_windows(s, 4, 1)[3]  # frames 4..7 (0-based 3..6), t = 7
    assert w.window_end == 7
    np.testing.assert_array_equal(w.frames, s.frames[3:7])
    np.testing.assert_array_equal(w.partial_traj.xy, s.gaze.xy[3:5])
    np.testing.assert_array_equal(w.target_traj.xy, s.gaze.xy[5:7])
    assert w.target_traj.frame_offset == 5


def test_detect_timesteps_and_stride_consistency(model):
    s = make_session(14)
    full = detect(s, model, "heatmap", stride=1)
    assert [r.timestep for r in full.records] == list(range(4, 15))
    strided = detect(s, model, "heatmap", stride=3)
    by_t = {r.timestep: r.score for r in full.records}
    for r in strided.records:
        assert r.score == by_t[r.timestep]


def test_detect_batch_size_does_not_change_scores(model):
    s = make_session(14)
    a = detect(s, model, "dtw", batch_size=1)
    b = detect(s, model, "dtw", batch_size=64)
    assert [r.score for r in a.records] == [r.score for r in b.records]


def test_causality_future_frames_do_not_matter(model):
    s = make_session(14, seed=1)
    t_cut = 9
    other = make_session(14, seed=2)
    mixed = SessionRecord("s", np.concatenate([s.frames[:t_cut], other.frames[t_cut:]]),
                          GazeTrajectory(np.concatenate([s.gaze.xy[:t_cut], other.gaze.xy[t_cut:]])),
                          s.labels)
    a = {r.timestep: r.score for r in detect(s, model).records}
    b = {r.timestep: r.score for r in detect(mixed, model).records}
    for t in range(4, t_cut + 1):
        assert a[t] == b[t]


def test_all_invalid_gaze_gives_absent_records(model):
    s = make_session(8, valid=np.zeros(8, dtype=bool))
    for fid in ("euclidean", "dtw", "heatmap"):
        recs = detect(s, model, fid).records
        assert len(recs) == 5 and all(r.absent and r.score is None for r in recs)
    assert all(not r.absent for r in detect(s, model, "entropy").records)


def test_short_session_produces_no_records(model, caplog):
    assert detect(make_session(3), model).records == []


def test_grid_mismatch_rejected(model):
    with pytest.raises(ConfigMismatchError):
        detect(make_session(8, H=3, W=3), model)


def test_detect_multi_matches_single(model):
    s = make_session(12, seed=4)
    multi = detect_multi(s, model, ("heatmap", "entropy"))
    for f in ("heatmap", "entropy"):
        assert [r.score for r in multi[f].records] == [r.score for r in detect(s, model, f).records]


def test_streaming_equals_batch(model):
    s = make_session(15, seed=5, valid=np.arange(15) % 5 != 0)
    batch = detect(s, model, "heatmap").records
    stream = StreamingDetector(model, "heatmap").replay(s)
    assert stream == batch


def test_label_stream_last_and_majority():
    labels = np.array([0, 0, 0, 1, 1, 0, 1, 1])
    s = make_session(8, labels=labels)
    st = ScoreStream("s", "x", [ScoreRecord(t, float(t), "x", 2) for t in range(4, 9)])
    assert [l for _, _, l in label_stream(s, st)] == list(labels[3:8])
    # predicted half ending at t covers frames t-1, t (1-based)
    maj = [l for _, _, l in label_stream(s, st, "majority", F=4)]
    assert maj == [0, 1, 0, 0, 1]


def test_label_stream_skips_absent_and_checks_range():
    s = make_session(6)
    st = ScoreStream("s", "x", [ScoreRecord(4, None, "x", 0, absent=True), ScoreRecord(5, 1.0, "x", 2)])
    assert [t for t, _, _ in label_stream(s, st)] == [5]
    with pytest.raises(AlignmentError):
        label_stream(s, ScoreStream("s", "x", [ScoreRecord(7, 1.0, "x", 2)]))


def test_pooled_pairs_concatenates_sessions():
    a = make_session(6, labels=np.array([0, 0, 0, 1, 0, 1]))
    b = SessionRecord("b", a.frames, a.gaze, np.array([1, 1, 1, 1, 0, 0]))
    sa = ScoreStream("s", "x", [ScoreRecord(t, 0.1 * t, "x", 2) for t in (4, 5, 6)])
    sb = ScoreStream("b", "x", [ScoreRecord(t, -0.1 * t, "x", 2) for t in (4, 5, 6)])
    scores, labels = pooled_pairs([a, b], [sa, sb])
    np.testing.assert_allclose(scores, [0.4, 0.5, 0.6, -0.4, -0.5, -0.6])
    np.testing.assert_array_equal(labels, [1, 0, 1, 1, 0, 0])


def test_stream_roundtrip(model):
    st = detect(make_session(8), model, "heatmap", config={"k": 1})
    back = ScoreStream.from_dict(st.to_dict())
    assert back == st
