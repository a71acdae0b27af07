"""Synthetic egocentric sessions with scripted attention and injected mistakes.

A session is a fixed workspace of objects (one presence channel each) and a
gaze trajectory that walks through a scripted sequence of objects.  Each
scripted step occupies a *slot*: a saccade from the previous fixation
followed by a dwell with small jitter.  A corrupted slot replaces the
scripted behaviour by one of three patterns and every frame of that slot is
labelled 1:

* ``shuffle``   - alternate between the scripted object and the one the
  script schedules next (steps executed out of order);
* ``erratic``   - rapid 1-3 frame fixations on random objects, inflated jitter;
* ``overshoot`` - repeatedly fixate a wrong object and correct back to the
  scripted one.

Slot durations are drawn before corruption is decided, so the expected
frame-level label density equals the step corruption rate.
"""

from __future__ import annotations

import dataclasses
import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ScriptError
from .heatmap import GazeTrajectory

log = logging.getLogger(__name__)

MISTAKE_KINDS = ("shuffle", "erratic", "overshoot")
ACTION_TYPES = ("hand-eye coordination", "object manipulation", "inspection", "preparation")

EVENT_NORMAL, EVENT_SHUFFLE, EVENT_ERRATIC, EVENT_OVERSHOOT = 0, 1, 2, 3
_KIND_CODE = {"shuffle": EVENT_SHUFFLE, "erratic": EVENT_ERRATIC, "overshoot": EVENT_OVERSHOOT}


def derive_seed(root, tag, index=0):
    """Splittable seed: (root, purpose tag, index) -> independent stream seed."""
    ss = np.random.SeedSequence([int(root) & 0xFFFFFFFF, zlib.crc32(tag.encode()), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(root, tag, index=0):
    return np.random.default_rng(derive_seed(root, tag, index))


@dataclass
class Workspace:
    centers: np.ndarray  # (n_objects, 2) normalized (x, y)
    radii: np.ndarray
    H: int = 8
    W: int = 8

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        self.radii = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        if len(self.centers) < 2:
            raise ValueError("a workspace needs at least two objects")
        if (self.centers < 0).any() or (self.centers > 1).any():
            raise ValueError("object centers must lie in [0, 1]^2")

    @property
    def n_objects(self):
        return len(self.centers)

    def feature_grid(self):
        """(C, H, W) float32 presence channels, one Gaussian blob per object."""
        ys = (np.arange(self.H) + 0.5) / self.H
        xs = (np.arange(self.W) + 0.5) / self.W
        gy, gx = np.meshgrid(ys, xs, indexing="ij")
        out = np.empty((self.n_objects, self.H, self.W))
        for k, ((cx, cy), r) in enumerate(zip(self.centers, self.radii)):
            out[k] = np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2 * r * r))
        return out.astype(np.float32)


@dataclass
class ActionScript:
    steps: tuple  # object ids, visited in order and cycled
    dwell_range: tuple = (14, 24)
    saccade_range: tuple = (2, 4)
    jitter: float = 0.01

    def __post_init__(self):
        self.steps = tuple(int(s) for s in self.steps)
        if not self.steps:
            raise ScriptError("script has no steps")
        if min(self.dwell_range) < 1 or min(self.saccade_range) < 1:
            raise ValueError("durations must be at least one frame")


@dataclass
class MistakeSpec:
    rate: float = 0.0
    kinds: tuple = MISTAKE_KINDS
    weights: tuple = (0.25, 0.5, 0.25)
    erratic_jitter_scale: float = 3.0
    erratic_dwell_range: tuple = (1, 3)
    subdwell_range: tuple = (3, 6)

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"mistake rate must be in [0, 1], got {self.rate}")
        if len(self.kinds) != len(self.weights):
            raise ValueError("kinds and weights differ in length")
        unknown = set(self.kinds) - set(MISTAKE_KINDS)
        if unknown:
            raise ValueError(f"unknown mistake kinds {sorted(unknown)}")


@dataclass
class SessionRecord:
    session_id: str
    frames: np.ndarray  # (L, C, H, W) float32
    gaze: GazeTrajectory
    labels: np.ndarray  # (L,) int8, 1 = mistake
    metadata: dict = field(default_factory=dict)
    events: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if not (len(self.frames) == len(self.gaze) == len(self.labels)):
            raise ValueError(
                f"frames/gaze/labels lengths differ: {len(self.frames)}, {len(self.gaze)}, {len(self.labels)}"
            )

    def __len__(self):
        return len(self.labels)

    @property
    def grid(self):
        return self.frames.shape[1:]


def random_workspace(rng, n_objects=5, H=8, W=8, min_separation=0.3, radius=0.08, margin=0.1):
    """Rejection-sample object centers at least ``min_separation`` apart."""
    for _ in range(10_000):
        pts = rng.uniform(margin, 1 - margin, size=(n_objects, 2))
        d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        if d[np.triu_indices(n_objects, 1)].min() >= min_separation:
            return Workspace(pts, np.full(n_objects, radius), H, W)
    raise RuntimeError("could not place objects; lower min_separation")


def _simulate(workspace, script, mistakes, length, rng, dropout):
    """Gaze, labels and per-frame event log for one session.

    The event log has columns (slot, scripted object, actual target, kind);
    actual target is -1 inside erratic spans.
    """
    n_obj = workspace.n_objects
    if any(s < 0 or s >= n_obj for s in script.steps):
        raise ScriptError(f"script references objects outside 0..{n_obj - 1}: {script.steps}")
    centers = workspace.centers
    xy = np.empty((length, 2))
    labels = np.zeros(length, dtype=np.int8)
    events = np.zeros((length, 4), dtype=np.int64)
    kinds = list(mistakes.kinds)
    weights = np.asarray(mistakes.weights, dtype=float)
    weights = weights / weights.sum()
    n_steps = len(script.steps)

    pos = centers[script.steps[0]] + rng.normal(0, script.jitter, 2)
    t = 0
    slot = 0
    while t < length:
        scripted = script.steps[slot % n_steps]
        sacc = int(rng.integers(script.saccade_range[0], script.saccade_range[1] + 1))
        dwell = int(rng.integers(script.dwell_range[0], script.dwell_range[1] + 1))
        if slot == 0:
            sacc = 0
        dur = sacc + dwell
        corrupted = rng.random() < mistakes.rate
        kind = kinds[int(rng.choice(len(kinds), p=weights))] if corrupted else None
        code = _KIND_CODE.get(kind, EVENT_NORMAL)

        # per-frame fixation targets for this slot: list of (object or -1, point, jitter)
        plan = []
        if kind is None:
            plan = [(scripted, centers[scripted], script.jitter)] * dur
        elif kind == "shuffle":
            later = script.steps[(slot + 1) % n_steps]
            if later == scripted:
                later = (scripted + 1) % n_obj
            lo, hi = mistakes.subdwell_range
            order = (later, scripted)
            turn = 0
            while len(plan) < dur:
                k = order[turn % 2]
                plan += [(k, centers[k], script.jitter)] * int(rng.integers(lo, hi + 1))
                turn += 1
            plan = plan[:dur]
        elif kind == "overshoot":
            lo, hi = mistakes.subdwell_range
            others = [k for k in range(n_obj) if k != scripted]
            while len(plan) < dur:
                wrong = int(rng.choice(others))
                plan += [(wrong, centers[wrong], script.jitter)] * int(rng.integers(lo, hi + 1))
                plan += [(scripted, centers[scripted], script.jitter)] * int(rng.integers(lo, hi + 1))
            plan = plan[:dur]
        else:  # erratic
            j = script.jitter * mistakes.erratic_jitter_scale
            lo, hi = mistakes.erratic_dwell_range
            while len(plan) < dur:
                k = int(rng.integers(n_obj))
                plan += [(-1, centers[k], j)] * int(rng.integers(lo, hi + 1))
            plan = plan[:dur]

        start = pos.copy()
        first_target = plan[0][1] if kind != "erratic" else centers[scripted]
        for i in range(dur):
            if t >= length:
                break
            obj, target, jit = plan[i]
            if kind != "erratic" and i < sacc:
                alpha = (i + 1) / (sacc + 1)
                point = start + alpha * (first_target - start)
            else:
                point = target + rng.normal(0, jit, 2)
            point = np.clip(point, 0.0, 1.0)
            xy[t] = point
            labels[t] = 1 if corrupted else 0
            events[t] = (slot, scripted, obj, code)
            pos = point
            t += 1
        slot += 1

    valid = rng.random(length) >= dropout
    xy[~valid] = 0.0
    return GazeTrajectory(xy, valid), labels, events


def generate_session(workspace, script, mistakes, length, seed, session_id="session",
                     dropout=0.0, metadata=None):
    """One seeded session; constant object-presence frames plus scripted gaze."""
    rng = np.random.default_rng(seed)
    gaze, labels, events = _simulate(workspace, script, mistakes, length, rng, dropout)
    grid = workspace.feature_grid()
    frames = np.broadcast_to(grid, (length,) + grid.shape).copy()
    return SessionRecord(session_id, frames, gaze, labels, dict(metadata or {}), events)


def frame_jitter(session):
    """Per-frame gaze displacement magnitude (NaN where undefined)."""
    xy, v = session.gaze.xy, session.gaze.valid
    step = np.full(len(xy), np.nan)
    ok = v[1:] & v[:-1]
    step[1:][ok] = np.linalg.norm(xy[1:] - xy[:-1], axis=1)[ok]
    return step


@dataclass
class BenchmarkConfig:
    n_sessions: int = 80
    split: tuple = (0.6, 0.15, 0.25)
    session_length: int = 128
    n_objects: int = 5
    n_scripts: int = 8
    script_length_range: tuple = (4, 6)
    H: int = 8
    W: int = 8
    mode: str = "one_class"  # or "unsupervised"
    mistake_rate: float = 0.28
    mistake_weights: tuple = (0.25, 0.5, 0.25)
    dwell_range: tuple = (14, 24)
    saccade_range: tuple = (2, 4)
    jitter: float = 0.01
    erratic_jitter_scale: float = 3.0
    dropout: float = 0.02
    min_separation: float = 0.3
    object_radius: float = 0.08

    def __post_init__(self):
        if self.mode not in ("one_class", "unsupervised"):
            raise ValueError(f"mode must be 'one_class' or 'unsupervised', got {self.mode!r}")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")

    def split_counts(self):
        n_train = int(round(self.split[0] * self.n_sessions))
        n_val = int(round(self.split[1] * self.n_sessions))
        return n_train, n_val, self.n_sessions - n_train - n_val

    def rate_for(self, split):
        if split == "train" and self.mode == "one_class":
            return 0.0
        return self.mistake_rate

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k in names})


@dataclass
class Benchmark:
    train: list
    val: list
    test: list
    manifest: dict

    def split(self, name):
        return getattr(self, name)


def make_scripts(config, seed):
    rng = make_rng(seed, "scripts")
    scripts = []
    for _ in range(config.n_scripts):
        n = int(rng.integers(config.script_length_range[0], config.script_length_range[1] + 1))
        steps = []
        while len(steps) < n:
            k = int(rng.integers(config.n_objects))
            if not steps or steps[-1] != k:
                steps.append(k)
        if steps[0] == steps[-1]:
            steps[-1] = (steps[-1] + 1) % config.n_objects
        scripts.append(ActionScript(tuple(steps), config.dwell_range, config.saccade_range, config.jitter))
    return scripts


def _session_metadata(script_id, script, rng):
    difficulty = len(script.steps) / 6.0 + rng.normal(0, 0.15)
    return {
        "activity_id": int(script_id),
        "difficulty": round(float(np.clip(difficulty, 0, 1.5)), 6),
        "confidence": round(float(rng.uniform(0, 1)), 6),
        "action_type": ACTION_TYPES[script_id % len(ACTION_TYPES)],
    }


def generate_split(config, seed, split, count, scripts):
    mistakes = MistakeSpec(config.rate_for(split), MISTAKE_KINDS, config.mistake_weights,
                           config.erratic_jitter_scale)
    sessions = []
    for i in range(count):
        rng = make_rng(seed, f"session/{split}", i)
        ws = random_workspace(rng, config.n_objects, config.H, config.W, config.min_separation,
                              config.object_radius)
        script_id = int(rng.integers(len(scripts)))
        meta = _session_metadata(script_id, scripts[script_id], rng)
        meta["split"] = split
        session_seed = derive_seed(seed, f"gaze/{split}", i)
        sessions.append(generate_session(ws, scripts[script_id], mistakes, config.session_length,
                                         session_seed, f"{split}-{i:04d}", config.dropout, meta))
    return sessions


def separability_check(sessions):
    """Mean displacement in mistake frames vs correct frames."""
    jit = np.concatenate([frame_jitter(s) for s in sessions])
    lab = np.concatenate([s.labels for s in sessions])
    ok = ~np.isnan(jit)
    pos = jit[ok & (lab == 1)]
    neg = jit[ok & (lab == 0)]
    if len(pos) == 0 or len(neg) == 0:
        return None
    return float(pos.mean()), float(neg.mean())


def generate_benchmark(config: BenchmarkConfig, seed: int):
    """Seeded train/val/test sessions plus a manifest that replays them."""
    scripts = make_scripts(config, seed)
    n_train, n_val, n_test = config.split_counts()
    splits = {
        "train": generate_split(config, seed, "train", n_train, scripts),
        "val": generate_split(config, seed, "val", n_val, scripts),
        "test": generate_split(config, seed, "test", n_test, scripts),
    }
    every = splits["train"] + splits["val"] + splits["test"]
    sep = separability_check(every)
    if sep is not None and not sep[0] > sep[1]:
        raise RuntimeError(
            f"benchmark is not separable: mistake jitter {sep[0]:.4f} <= correct jitter {sep[1]:.4f}"
        )
    manifest = {
        "generator": "gazecomp.synthetic",
        "seed": int(seed),
        "config": config.to_dict(),
        "scripts": [list(s.steps) for s in scripts],
        "sessions": {k: [s.session_id for s in v] for k, v in splits.items()},
        "label_density": {k: float(np.mean(np.concatenate([s.labels for s in v]))) if v else 0.0
                          for k, v in splits.items()},
        "jitter_means": None if sep is None else {"mistake": sep[0], "correct": sep[1]},
    }
    return Benchmark(splits["train"], splits["val"], splits["test"], manifest)


def replay_manifest(manifest):
    return generate_benchmark(BenchmarkConfig.from_dict(manifest["config"]), manifest["seed"])
