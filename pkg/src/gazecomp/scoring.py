"""Trajectory comparison scores.

All four functions follow one polarity: a higher score means the window
looks more like a mistake.  The heatmap likelihood is therefore stored
negated (the raw likelihood is kept in ``ScoreRecord.raw``).

Ground-truth frames without gaze are excluded from every sum.  When a
window has no valid ground-truth frame the record is marked ``absent`` and
carries no score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ShapeError
from .heatmap import GazeTrajectory, HeatmapStack, cell_index

SCORING_FUNCTIONS = ("euclidean", "dtw", "heatmap", "entropy")


@dataclass(frozen=True)
class ScoreRecord:
    timestep: int
    score: float | None
    function_id: str
    frames_used: int
    raw: float | None = None
    absent: bool = False

    def to_dict(self):
        return {
            "timestep": self.timestep,
            "score": self.score,
            "function_id": self.function_id,
            "frames_used": self.frames_used,
            "raw": self.raw,
            "absent": self.absent,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _absent(function_id, timestep):
    return ScoreRecord(timestep, None, function_id, 0, None, True)


def _check_lengths(gt, pred):
    if len(gt) != len(pred):
        raise ShapeError(f"trajectory lengths differ: {len(gt)} vs {len(pred)}")


def score_euclidean(gt: GazeTrajectory, pred: GazeTrajectory, timestep=0):
    """Sum of point-to-point distances over frames where both are valid."""
    _check_lengths(gt, pred)
    keep = gt.valid & pred.valid
    if not keep.any():
        return _absent("euclidean", timestep)
    d = np.linalg.norm(gt.xy[keep] - pred.xy[keep], axis=1)
    return ScoreRecord(timestep, math.fsum(d), "euclidean", int(keep.sum()))


def dtw_cost(a, b):
    """Exact DTW cost between point sequences under Euclidean distance.

    Steps are match, insertion and deletion; no window constraint.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("DTW needs nonempty sequences")
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(acc[i - 1, j], acc[i, j - 1], acc[i - 1, j - 1])
    return float(acc[n, m])


def score_dtw(gt: GazeTrajectory, pred: GazeTrajectory, timestep=0):
    g = gt.xy[gt.valid]
    p = pred.xy[pred.valid]
    if len(p) == 0:
        raise ValueError("predicted trajectory has no valid points")
    if len(g) == 0:
        return _absent("dtw", timestep)
    return ScoreRecord(timestep, dtw_cost(g, p), "dtw", len(g))


def heatmap_likelihood(gt: GazeTrajectory, qhat: HeatmapStack):
    """Per-frame predicted mass at each ground-truth cell (NaN where invalid).

    ``gt`` aligns with the last ``len(gt)`` frames of ``qhat``.
    """
    n = len(gt)
    if qhat.frames < n:
        raise IndexError(f"heatmap stack has {qhat.frames} frames, trajectory needs {n}")
    vals = qhat.values[qhat.frames - n:]
    out = np.full(n, np.nan)
    v = gt.valid
    if v.any():
        rows, cols = cell_index(gt.xy[v, 0], gt.xy[v, 1], qhat.height, qhat.width)
        out[v] = vals[np.flatnonzero(v), rows, cols]
    return out


def score_heatmap(gt: GazeTrajectory, qhat: HeatmapStack, timestep=0):
    """Negated summed likelihood of the ground-truth fixations."""
    lik = heatmap_likelihood(gt, qhat)
    keep = ~np.isnan(lik)
    if not keep.any():
        return _absent("heatmap", timestep)
    total = math.fsum(lik[keep])
    return ScoreRecord(timestep, -total, "heatmap", int(keep.sum()), raw=total)


def heatmap_entropy(frame):
    """Entropy in bits of one normalized grid; 0 log 0 is 0."""
    p = np.asarray(frame, dtype=np.float64).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def score_entropy(qhat: HeatmapStack, timestep=0):
    """Mean per-frame entropy (bits) of the predicted heatmaps."""
    sums = qhat.frame_sums()
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-4)
    if bad.size:
        raise ValueError(f"frame {int(bad[0])} is not normalized (sum {float(sums[bad[0]]):.6f})")
    ent = [heatmap_entropy(f) for f in qhat.values]
    return ScoreRecord(timestep, math.fsum(ent) / len(ent), "entropy", len(ent))


def score_window(function_id, gt: GazeTrajectory, pred: GazeTrajectory, qhat: HeatmapStack, timestep=0):
    """Dispatch by name; ``qhat`` holds just the predicted frames."""
    if function_id == "euclidean":
        return score_euclidean(gt, pred, timestep)
    if function_id == "dtw":
        return score_dtw(gt, pred, timestep)
    if function_id == "heatmap":
        return score_heatmap(gt, qhat, timestep)
    if function_id == "entropy":
        return score_entropy(qhat, timestep)
    raise ValueError(f"unknown scoring function {function_id!r}; expected one of {SCORING_FUNCTIONS}")


def minmax_normalize(values):
    """Scale to [0, 1]; a zero-range input maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return v
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def late_fuse(a, b, function_id="late_fusion"):
    """Average two min-max normalized score streams, timestep by timestep.

    Normalization ranges come from the records passed in, so callers
    should hand over the whole evaluation split at once.  A record absent
    in either stream is absent in the result.
    """
    a, b = list(a), list(b)
    if len(a) != len(b) or any(ra.timestep != rb.timestep for ra, rb in zip(a, b)):
        raise AlignmentError("score streams are not aligned on timesteps")
    present = [not (ra.absent or rb.absent) for ra, rb in zip(a, b)]
    na = minmax_normalize([r.score for r, ok in zip(a, present) if ok])
    nb = minmax_normalize([r.score for r, ok in zip(b, present) if ok])
    fused = iter((na + nb) / 2.0)
    out = []
    for ra, ok in zip(a, present):
        if ok:
            out.append(ScoreRecord(ra.timestep, float(next(fused)), function_id, ra.frames_used))
        else:
            out.append(_absent(function_id, ra.timestep))
    return out
