"""Gaze trajectories and their heatmap encoding.

Coordinates are normalized to [0, 1]; ``x`` runs along columns and ``y``
along rows.  A point falls in cell ``floor(coord * dim)``, clamped so that
a coordinate of exactly 1.0 lands in the last cell.  Decoding returns the
center of the argmax cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ShapeError


class GazePoint(NamedTuple):
    x: float
    y: float
    valid: bool = True


@dataclass
class GazeTrajectory:
    """Per-frame 2D fixations; ``xy`` is (N, 2), ``valid`` is (N,)."""

    xy: np.ndarray
    valid: np.ndarray = None
    frame_offset: int = 0

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=np.float64).reshape(-1, 2)
        if self.valid is None:
            self.valid = np.ones(len(self.xy), dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool).reshape(-1)
        if len(self.valid) != len(self.xy):
            raise ShapeError(f"{len(self.xy)} points but {len(self.valid)} validity flags")
        if len(self.xy) < 1:
            raise ShapeError("a trajectory needs at least one point")
        v = self.valid
        if v.any():
            pts = self.xy[v]
            if not np.isfinite(pts).all():
                raise ValueError("non-finite gaze coordinates")
            if (pts < 0).any() or (pts > 1).any():
                raise ValueError("valid gaze coordinates must lie in [0, 1]")

    @classmethod
    def from_points(cls, points, frame_offset=0):
        points = [p if isinstance(p, GazePoint) else GazePoint(*p) for p in points]
        xy = [(p.x, p.y) if p.valid else (0.0, 0.0) for p in points]
        return cls(np.array(xy, dtype=np.float64), np.array([p.valid for p in points]), frame_offset)

    def __len__(self):
        return len(self.xy)

    @property
    def points(self):
        return [GazePoint(float(x), float(y), bool(v)) for (x, y), v in zip(self.xy, self.valid)]

    def slice(self, start, stop):
        """Sub-trajectory over local indices [start, stop)."""
        return GazeTrajectory(self.xy[start:stop].copy(), self.valid[start:stop].copy(),
                              self.frame_offset + start)


@dataclass
class HeatmapStack:
    """F per-frame probability grids of size H x W."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 3:
            raise ShapeError(f"heatmap stack must be (F, H, W), got {self.values.shape}")

    @property
    def frames(self):
        return self.values.shape[0]

    @property
    def height(self):
        return self.values.shape[1]

    @property
    def width(self):
        return self.values.shape[2]

    def frame_sums(self):
        return self.values.reshape(self.frames, -1).sum(axis=1)

    def is_normalized(self, tol=1e-6):
        return bool(np.all(self.values >= 0) and np.all(np.abs(self.frame_sums() - 1.0) <= tol))

    def __getitem__(self, idx):
        return HeatmapStack(self.values[idx])


def cell_index(x, y, H, W):
    """Grid cell (row, col) containing normalized point (x, y)."""
    col = np.minimum(np.floor(np.asarray(x) * W).astype(int), W - 1)
    row = np.minimum(np.floor(np.asarray(y) * H).astype(int), H - 1)
    return row, col


def cell_center(row, col, H, W):
    """Normalized (x, y) of a cell center."""
    return (np.asarray(col) + 0.5) / W, (np.asarray(row) + 0.5) / H


def encode_gaussian(traj, sigma=2.0, H=64, W=64, dtype=np.float64):
    """Encode each fixation as a normalized discrete Gaussian on the grid.

    ``sigma`` is in grid cells.  Invalid points become uniform frames.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if H < 2 or W < 2:
        raise ValueError("grid must be at least 2x2")
    if not np.isfinite(traj.xy).all():
        raise ValueError("non-finite gaze coordinates")
    n = len(traj)
    out = np.full((n, H, W), 1.0 / (H * W), dtype=np.float64)
    valid = traj.valid
    if valid.any():
        rows, cols = cell_index(traj.xy[valid, 0], traj.xy[valid, 1], H, W)
        rr = np.arange(H)[None, :, None] - rows[:, None, None]
        cc = np.arange(W)[None, None, :] - cols[:, None, None]
        g = np.exp(-(rr**2 + cc**2) / (2.0 * sigma**2))
        out[valid] = g / g.sum(axis=(1, 2), keepdims=True)
    return HeatmapStack(out.astype(dtype, copy=False))


def decode_peak(stack, frame_offset=0):
    """Argmax cell center per frame; ties go to the lowest row-major index."""
    F, H, W = stack.values.shape
    flat = stack.values.reshape(F, -1).argmax(axis=1)
    rows, cols = np.divmod(flat, W)
    x, y = cell_center(rows, cols, H, W)
    return GazeTrajectory(np.stack([x, y], axis=1), np.ones(F, dtype=bool), frame_offset)


def total_variation(a, b):
    """Total variation distance between two distributions on the same grid."""
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())
