"""Layers built on the autodiff engine: linear maps, layer norm, attention."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Parameter, gelu, layer_norm, matmul, softmax


class Module:
    """Parameter container; parameters are discovered in attribute order."""

    def named_parameters(self, prefix=""):
        for key, val in vars(self).items():
            if isinstance(val, Parameter):
                yield prefix + key, val
            elif isinstance(val, Module):
                yield from val.named_parameters(f"{prefix}{key}.")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()


def _normal(rng, shape, std, dtype):
    return (rng.standard_normal(shape) * std).astype(dtype)


class Linear(Module):
    def __init__(self, n_in, n_out, rng, dtype=np.float64, std=None, name="linear"):
        std = math.sqrt(2.0 / (n_in + n_out)) if std is None else std
        self.weight = Parameter(_normal(rng, (n_in, n_out), std, dtype), f"{name}.weight")
        self.bias = Parameter(np.zeros(n_out, dtype=dtype), f"{name}.bias")

    def __call__(self, x):
        return matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, d, dtype=np.float64, name="ln"):
        self.gamma = Parameter(np.ones(d, dtype=dtype), f"{name}.gamma")
        self.beta = Parameter(np.zeros(d, dtype=dtype), f"{name}.beta")

    def __call__(self, x):
        return layer_norm(x, self.gamma, self.beta)


class MultiHeadAttention(Module):
    """Scaled dot-product attention over (B, N, d) inputs."""

    def __init__(self, d, heads, rng, dtype=np.float64, name="attn"):
        if d % heads:
            raise ValueError(f"width {d} not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(d, d, rng, dtype, name=f"{name}.q")
        self.k = Linear(d, d, rng, dtype, name=f"{name}.k")
        self.v = Linear(d, d, rng, dtype, name=f"{name}.v")
        self.o = Linear(d, d, rng, dtype, name=f"{name}.o")

    def _split(self, x):
        B, N, d = x.shape
        return x.reshape(B, N, self.heads, d // self.heads).transpose(0, 2, 1, 3)

    def attention_weights(self, query, memory):
        q = self._split(self.q(query))
        k = self._split(self.k(memory))
        dk = q.shape[-1]
        return softmax(matmul(q, k.swapaxes(-1, -2)) * (1.0 / math.sqrt(dk)), axis=-1)

    def __call__(self, query, memory):
        B, N, d = query.shape
        w = self.attention_weights(query, memory)
        ctx = matmul(w, self._split(self.v(memory)))
        return self.o(ctx.transpose(0, 2, 1, 3).reshape(B, N, d))


class FeedForward(Module):
    def __init__(self, d, hidden, rng, dtype=np.float64, name="ffn"):
        self.fc1 = Linear(d, hidden, rng, dtype, name=f"{name}.fc1")
        self.fc2 = Linear(hidden, d, rng, dtype, name=f"{name}.fc2")

    def __call__(self, x):
        return self.fc2(gelu(self.fc1(x)))


class EncoderLayer(Module):
    """Pre-norm self-attention block."""

    def __init__(self, d, heads, hidden, rng, dtype=np.float64, name="enc"):
        self.ln1 = LayerNorm(d, dtype, f"{name}.ln1")
        self.attn = MultiHeadAttention(d, heads, rng, dtype, f"{name}.attn")
        self.ln2 = LayerNorm(d, dtype, f"{name}.ln2")
        self.ffn = FeedForward(d, hidden, rng, dtype, f"{name}.ffn")

    def __call__(self, x):
        h = self.ln1(x)
        x = x + self.attn(h, h)
        return x + self.ffn(self.ln2(x))


class DecoderLayer(Module):
    """Pre-norm cross-attention block: queries attend to encoder memory."""

    def __init__(self, d, heads, hidden, rng, dtype=np.float64, name="dec"):
        self.ln_q = LayerNorm(d, dtype, f"{name}.ln_q")
        self.ln_m = LayerNorm(d, dtype, f"{name}.ln_m")
        self.cross = MultiHeadAttention(d, heads, rng, dtype, f"{name}.cross")
        self.ln2 = LayerNorm(d, dtype, f"{name}.ln2")
        self.ffn = FeedForward(d, hidden, rng, dtype, f"{name}.ffn")

    def __call__(self, x, memory):
        x = x + self.cross(self.ln_q(x), self.ln_m(memory))
        return x + self.ffn(self.ln2(x))


def sinusoidal_table(n, width):
    """Standard sin/cos position table of shape (n, width); width even."""
    if width == 0:
        return np.zeros((n, 0))
    pos = np.arange(n)[:, None]
    i = np.arange(width // 2)[None, :]
    ang = pos / (10000.0 ** (2 * i / width))
    out = np.zeros((n, width))
    out[:, 0::2] = np.sin(ang)
    out[:, 1::2] = np.cos(ang)
    return out


def grid_positional_encoding(F, H, W, d):
    """Concatenated sinusoidal encodings of (frame, row, col); shape (F*H*W, d)."""
    w = 2 * (d // 6)
    wf = d - 2 * w
    pf = sinusoidal_table(F, wf - (wf % 2))
    pr = sinusoidal_table(H, w)
    pc = sinusoidal_table(W, w)
    f, r, c = np.meshgrid(np.arange(F), np.arange(H), np.arange(W), indexing="ij")
    parts = [pf[f.ravel()], pr[r.ravel()], pc[c.ravel()]]
    out = np.concatenate(parts, axis=1)
    if out.shape[1] < d:
        out = np.pad(out, ((0, 0), (0, d - out.shape[1])))
    return out
