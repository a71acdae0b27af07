"""Per-timestep mistake detection over sessions.

Timesteps are 1-based frame indices: the window ending at ``t`` covers
frames ``t-F+1 .. t`` and its score is attached to frame ``t``.  Frames
before the first full window get no score.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, ConfigMismatchError
from .heatmap import GazeTrajectory, HeatmapStack
from .model import ClipWindow, complete, predict
from .scoring import ScoreRecord, score_window

log = logging.getLogger(__name__)


@dataclass
class ScoreStream:
    session_id: str
    function_id: str
    records: list
    config: dict = field(default_factory=dict)

    def scored(self):
        return [r for r in self.records if not r.absent]

    def to_dict(self):
        return {
            "session_id": self.session_id,
            "function_id": self.function_id,
            "config": self.config,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["session_id"], d["function_id"], [ScoreRecord.from_dict(r) for r in d["records"]],
                   d.get("config", {}))


def window_count(length, F, stride):
    return 0 if length < F else (length - F) // stride + 1


def extract_windows(session, F, stride=1):
    """All windows of F frames ending at t = F, F+stride, ... (1-based)."""
    L = len(session)
    if L < F:
        log.warning("session %s has %d frames, fewer than F=%d; no windows", session.session_id, L, F)
        return []
    half = F // 2
    out = []
    for t in range(F, L + 1, stride):
        lo = t - F
        out.append(ClipWindow(
            frames=session.frames[lo:t],
            partial_traj=session.gaze.slice(lo, lo + half),
            target_traj=session.gaze.slice(lo + half, t),
            window_end=t,
            labels=session.labels[lo:t],
        ))
    return out


def check_compatible(session, model):
    c = model.config
    if tuple(session.frames.shape[1:]) != (c.C, c.H, c.W):
        raise ConfigMismatchError(
            f"session grid {tuple(session.frames.shape[1:])} does not match model (C, H, W) = {(c.C, c.H, c.W)}"
        )


def _score_clip(clip, qhat, function_id):
    half = clip.F // 2
    pred, _ = complete(clip, None, qhat=HeatmapStack(qhat))
    return score_window(function_id, clip.target_traj, pred, HeatmapStack(qhat[half:]), clip.window_end)


def detect(session, model, function_id="heatmap", stride=1, batch_size=16, config=None):
    """Score every window of ``session`` with the given scoring function."""
    check_compatible(session, model)
    windows = extract_windows(session, model.config.F, stride)
    records = []
    for lo in range(0, len(windows), batch_size):
        batch = windows[lo:lo + batch_size]
        qhats = predict(model, batch)
        records.extend(_score_clip(clip, q, function_id) for clip, q in zip(batch, qhats))
    return ScoreStream(session.session_id, function_id, records, dict(config or {}))


def detect_multi(session, model, function_ids, stride=1, batch_size=16, config=None):
    """Like :func:`detect` for several scoring functions sharing one forward pass."""
    check_compatible(session, model)
    windows = extract_windows(session, model.config.F, stride)
    records = {f: [] for f in function_ids}
    for lo in range(0, len(windows), batch_size):
        batch = windows[lo:lo + batch_size]
        qhats = predict(model, batch)
        for clip, q in zip(batch, qhats):
            for f in function_ids:
                records[f].append(_score_clip(clip, q, f))
    return {f: ScoreStream(session.session_id, f, records[f], dict(config or {})) for f in function_ids}


def label_stream(session, stream, mode="last", F=None):
    """(timestep, score, label) triples for every scored record.

    ``mode="last"`` uses the label of frame t; ``mode="majority"`` takes the
    majority label over the predicted half ending at t (needs ``F``).
    """
    L = len(session)
    out = []
    for r in stream.records:
        if r.absent:
            continue
        if not 1 <= r.timestep <= L:
            raise AlignmentError(f"timestep {r.timestep} has no label in session {session.session_id}")
        if mode == "last":
            lab = int(session.labels[r.timestep - 1])
        elif mode == "majority":
            if F is None:
                raise ValueError("majority labelling needs F")
            span = session.labels[r.timestep - F // 2:r.timestep]
            lab = int(2 * span.sum() > len(span))
        else:
            raise ValueError(f"unknown label mode {mode!r}")
        out.append((r.timestep, r.score, lab))
    return out


def pooled_pairs(sessions, streams, mode="last", F=None):
    """Micro-averaged (scores, labels) arrays over many sessions."""
    by_id = {s.session_id: s for s in sessions}
    scores, labels = [], []
    for st in streams:
        for _, s, l in label_stream(by_id[st.session_id], st, mode, F):
            scores.append(s)
            labels.append(l)
    return np.asarray(scores, dtype=np.float64), np.asarray(labels, dtype=np.int64)


class StreamingDetector:
    """Incremental detection: push one frame and gaze sample, maybe get a score.

    Produces exactly the records of ``detect(..., stride=1)``.
    """

    def __init__(self, model, function_id="heatmap"):
        self.model = model
        self.function_id = function_id
        F = model.config.F
        self._frames = deque(maxlen=F)
        self._xy = deque(maxlen=F)
        self._valid = deque(maxlen=F)
        self.t = 0

    def push(self, frame, x, y, valid=True):
        F = self.model.config.F
        self._frames.append(np.asarray(frame))
        self._xy.append((float(x), float(y)) if valid else (0.0, 0.0))
        self._valid.append(bool(valid))
        self.t += 1
        if self.t < F:
            return None
        half = F // 2
        xy = np.asarray(self._xy)
        valid = np.asarray(self._valid)
        lo = self.t - F
        clip = ClipWindow(
            frames=np.stack(self._frames),
            partial_traj=GazeTrajectory(xy[:half], valid[:half], lo),
            target_traj=GazeTrajectory(xy[half:], valid[half:], lo + half),
            window_end=self.t,
        )
        qhat = predict(self.model, [clip])[0]
        return _score_clip(clip, qhat, self.function_id)

    def replay(self, session):
        """Feed a whole session; returns the list of emitted records."""
        out = []
        for i in range(len(session)):
            x, y = session.gaze.xy[i]
            rec = self.push(session.frames[i], x, y, session.gaze.valid[i])
            if rec is not None:
                out.append(rec)
        return out
