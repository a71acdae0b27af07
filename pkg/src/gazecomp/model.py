"""Gaze completion network.

Visual feature grids and the first half of a gaze trajectory go in; F
per-frame heatmaps come out.  Two conditioning paths are available:

* channel fusion: observed-half heatmaps become an extra input channel
  (zeros on the unobserved half);
* correlation fusion: a trajectory token joins the encoder sequence, then a
  dedicated cross-attention step lets every visual token read from it.

The decoder is a stack of cross-attention blocks with one learned query per
output cell.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter, Tensor, concat, kl_loss, no_grad, softmax
from .errors import ModelError, NonFiniteError, ShapeError
from .heatmap import GazeTrajectory, HeatmapStack, decode_peak, encode_gaussian
from .nn import DecoderLayer, EncoderLayer, LayerNorm, Linear, Module, MultiHeadAttention, grid_positional_encoding

FUSION_MODES = ("none", "channel", "correlation", "both")


@dataclass(frozen=True)
class ModelConfig:
    F: int = 8
    H: int = 8
    W: int = 8
    C: int = 5
    d: int = 64
    heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    ffn_dim: int = 128
    sigma: float = 2.0
    fusion_mode: str = "both"
    supervised_frames: str = "second_half"  # or "all"
    positional_encoding: bool = True
    dtype: str = "float64"
    kl_eps: float = 1e-8
    kl_reverse: bool = False
    head_init_std: float = 1e-3

    def __post_init__(self):
        if self.F < 2 or self.F % 2:
            raise ValueError(f"F must be even and >= 2, got {self.F}")
        if self.d % self.heads:
            raise ValueError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.fusion_mode not in FUSION_MODES:
            raise ValueError(f"fusion_mode must be one of {FUSION_MODES}, got {self.fusion_mode!r}")
        if self.supervised_frames not in ("second_half", "all"):
            raise ValueError("supervised_frames must be 'second_half' or 'all'")
        if self.H < 2 or self.W < 2:
            raise ValueError("token grid must be at least 2x2")

    @property
    def channel_fusion(self):
        return self.fusion_mode in ("channel", "both")

    @property
    def correlation_fusion(self):
        return self.fusion_mode in ("correlation", "both")

    @property
    def n_visual(self):
        return self.F * self.H * self.W

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    def supervised_slice(self):
        return slice(self.F // 2, self.F) if self.supervised_frames == "second_half" else slice(0, self.F)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class ClipWindow:
    """F frames of features plus the gaze split into observed/target halves.

    ``window_end`` is the 1-based timestep of the last frame.
    """

    frames: np.ndarray
    partial_traj: GazeTrajectory
    target_traj: GazeTrajectory | None = None
    window_end: int = 0
    labels: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        F = self.frames.shape[0]
        if F % 2:
            raise ShapeError(f"window length must be even, got {F}")
        if len(self.partial_traj) != F // 2:
            raise ShapeError(f"partial trajectory has {len(self.partial_traj)} points, expected {F // 2}")
        if self.target_traj is not None and len(self.target_traj) != F // 2:
            raise ShapeError(f"target trajectory has {len(self.target_traj)} points, expected {F // 2}")

    @property
    def F(self):
        return self.frames.shape[0]

    def full_traj(self):
        if self.target_traj is None:
            raise ModelError("window has no target trajectory")
        xy = np.concatenate([self.partial_traj.xy, self.target_traj.xy])
        valid = np.concatenate([self.partial_traj.valid, self.target_traj.valid])
        return GazeTrajectory(xy, valid, self.partial_traj.frame_offset)


def channel_fuse(frames, heatmaps):
    """Append observed-half heatmaps as one extra channel, zero elsewhere.

    ``frames`` is (..., F, C, H, W); ``heatmaps`` is (..., F/2, H, W).
    """
    frames = np.asarray(frames)
    heatmaps = np.asarray(heatmaps)
    F = frames.shape[-4]
    if heatmaps.shape[-2:] != frames.shape[-2:]:
        raise ShapeError(f"heatmap grid {heatmaps.shape[-2:]} does not match frame grid {frames.shape[-2:]}")
    if heatmaps.shape[-3] != F // 2:
        raise ShapeError(f"expected {F // 2} heatmaps, got {heatmaps.shape[-3]}")
    extra = np.zeros(frames.shape[:-3] + (1,) + frames.shape[-2:], dtype=frames.dtype)
    extra[..., : F // 2, 0, :, :] = heatmaps
    return np.concatenate([frames, extra], axis=-3)


class CorrelationModule(Module):
    """Each visual token attends to the single trajectory token; residual add."""

    def __init__(self, d, heads, rng, dtype):
        self.ln_visual = LayerNorm(d, dtype, "corr.ln_visual")
        self.ln_gaze = LayerNorm(d, dtype, "corr.ln_gaze")
        self.attn = MultiHeadAttention(d, heads, rng, dtype, "corr.attn")

    def __call__(self, gaze_token, visual_tokens):
        if gaze_token.shape[-1] != visual_tokens.shape[-1]:
            raise ShapeError(f"token widths differ: {gaze_token.shape} vs {visual_tokens.shape}")
        return visual_tokens + self.attn(self.ln_visual(visual_tokens), self.ln_gaze(gaze_token))


class CompletionModel(Module):
    def __init__(self, config: ModelConfig, seed=0):
        self.config = config
        c = config
        dt = c.np_dtype
        rng = np.random.default_rng(seed)
        c_in = c.C + 1 if c.channel_fusion else c.C
        self.embed = Linear(c_in, c.d, rng, dt, name="embed")
        self.traj_proj = Linear(c.H * c.W, c.d, rng, dt, name="traj_proj")
        self.encoder = [EncoderLayer(c.d, c.heads, c.ffn_dim, rng, dt, f"enc{i}") for i in range(c.encoder_layers)]
        self.correlation = CorrelationModule(c.d, c.heads, rng, dt) if c.correlation_fusion else None
        self.queries = Parameter((rng.standard_normal((c.n_visual, c.d)) * 0.02).astype(dt), "queries")
        self.decoder = [DecoderLayer(c.d, c.heads, c.ffn_dim, rng, dt, f"dec{i}") for i in range(c.decoder_layers)]
        self.ln_out = LayerNorm(c.d, dt, "ln_out")
        self.head = Linear(c.d, 1, rng, dt, std=c.head_init_std, name="head")
        if c.positional_encoding:
            self.pos = grid_positional_encoding(c.F, c.H, c.W, c.d).astype(dt)
        else:
            self.pos = np.zeros((c.n_visual, c.d), dtype=dt)

    def parameter_count(self):
        return int(sum(p.size for p in self.parameters()))

    # -- stages -----------------------------------------------------------
    def _check_inputs(self, frames, partial):
        c = self.config
        if frames.shape[1:] != (c.F, c.C, c.H, c.W):
            raise ShapeError(f"frames {frames.shape[1:]} do not match config (F, C, H, W) = {(c.F, c.C, c.H, c.W)}")
        if partial.shape[1:] != (c.F // 2, c.H, c.W):
            raise ShapeError(f"partial heatmaps {partial.shape[1:]} do not match config")

    def token_embed(self, frames, partial):
        """Visual tokens (B, F*H*W, d) and trajectory token (B, 1, d).

        ``frames`` is (B, F, C, H, W) and ``partial`` is the observed-half
        heatmap stack (B, F/2, H, W).  Positional encodings are added to
        visual tokens only.
        """
        c = self.config
        frames = np.asarray(frames, dtype=c.np_dtype)
        partial = np.asarray(partial, dtype=c.np_dtype)
        self._check_inputs(frames, partial)
        if c.channel_fusion:
            frames = channel_fuse(frames, partial)
        B = frames.shape[0]
        cells = frames.transpose(0, 1, 3, 4, 2).reshape(B, c.n_visual, -1)
        visual = self.embed(Tensor(cells)) + self.pos
        pooled = partial.mean(axis=1).reshape(B, 1, c.H * c.W)
        traj = self.traj_proj(Tensor(pooled))
        return visual, traj

    def encode(self, visual, traj=None):
        """Self-attention stack over [trajectory token; visual tokens]."""
        x = visual if traj is None else concat([traj, visual], axis=1)
        for layer in self.encoder:
            x = layer(x)
        return x

    def correlation_fuse(self, gaze_token, visual_tokens):
        if self.correlation is None:
            raise ModelError("correlation fusion is disabled in this config")
        return self.correlation(gaze_token, visual_tokens)

    def decode(self, memory):
        c = self.config
        B = memory.shape[0]
        x = (self.queries + self.pos) + np.zeros((B, c.n_visual, c.d), dtype=c.np_dtype)
        for layer in self.decoder:
            x = layer(x, memory)
        logits = self.head(self.ln_out(x)).reshape(B, c.F, c.H * c.W)
        return softmax(logits, axis=-1).reshape(B, c.F, c.H, c.W)

    def forward_tensor(self, frames, partial):
        """Batched forward pass returning the (B, F, H, W) prediction tensor."""
        c = self.config
        try:
            visual, traj = self.token_embed(frames, partial)
            if c.correlation_fusion:
                enc = self.encode(visual, traj)
                memory = self.correlation_fuse(enc[:, 0:1, :], enc[:, 1:, :])
            else:
                memory = self.encode(visual)
            return self.decode(memory)
        except NonFiniteError as exc:
            raise ModelError(f"non-finite activation in forward pass: {exc}") from exc

    def loss(self, frames, partial, target):
        """Batch-mean KL over the supervised frames; ``target`` is (B, F, H, W)."""
        pred = self.forward_tensor(frames, partial)
        sl = self.config.supervised_slice()
        B = pred.shape[0]
        total = kl_loss(pred[:, sl], np.asarray(target)[:, sl], eps=self.config.kl_eps,
                        reverse=self.config.kl_reverse)
        return total * (1.0 / B)

    # -- array helpers ----------------------------------------------------
    def state_arrays(self):
        return [(name, p.data) for name, p in self.named_parameters()]

    def load_state_arrays(self, arrays):
        params = list(self.named_parameters())
        if len(params) != len(arrays):
            raise ModelError(f"expected {len(params)} parameter arrays, got {len(arrays)}")
        for (name, p), arr in zip(params, arrays):
            arr = np.asarray(arr)
            if arr.shape != p.shape:
                raise ModelError(f"shape mismatch for {name}: {arr.shape} vs {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)
            p.zero_grad()
            p.m = p.v = None


def window_inputs(clips, config):
    """Stack clips into (frames, partial heatmaps) arrays."""
    dt = config.np_dtype
    frames = np.stack([np.asarray(c.frames, dtype=dt) for c in clips])
    partial = np.stack([encode_gaussian(c.partial_traj, config.sigma, config.H, config.W, dt).values
                        for c in clips])
    return frames, partial


def window_targets(clips, config):
    dt = config.np_dtype
    return np.stack([encode_gaussian(c.full_traj(), config.sigma, config.H, config.W, dt).values for c in clips])


def predict(model, clips):
    """Predicted heatmaps, (B, F, H, W), for a batch of clips (no graph)."""
    frames, partial = window_inputs(clips, model.config)
    with no_grad():
        return model.forward_tensor(frames, partial).data


def forward(clip, model):
    """Predicted heatmap stack for a single clip."""
    return HeatmapStack(predict(model, [clip])[0])


def complete(clip, model, qhat=None):
    """Completed trajectory over the unobserved half, plus the full stack.

    A precomputed ``qhat`` may be passed to skip the forward pass.
    """
    if qhat is None:
        qhat = forward(clip, model)
    half = clip.F // 2
    offset = clip.partial_traj.frame_offset + half
    return decode_peak(qhat[half:], frame_offset=offset), qhat
