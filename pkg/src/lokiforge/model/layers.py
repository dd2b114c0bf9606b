"""ALiBi biases, RMSNorm and the SwiGLU feed-forward block."""

import math

import numpy as np

from ..errors import ShapeMismatch
from ..numerics import matmul, mul, record, reshape, silu
from ..numerics.tensor import as_tensor


def alibi_slopes(n_heads):
    """Per-head ALiBi slopes.

    Power-of-two head counts get ``2 ** (-8 h / H)`` for h = 1..H. Other counts
    take the slopes for the next lower power of two and fill the remainder with
    every other slope of the doubled count.
    """
    if n_heads < 1:
        raise ValueError("n_heads must be >= 1")

    def pow2(n):
        return [2.0 ** (-8.0 * h / n) for h in range(1, n + 1)]

    if n_heads & (n_heads - 1) == 0:
        return pow2(n_heads)
    closest = 2 ** int(math.floor(math.log2(n_heads)))
    return pow2(closest) + alibi_slopes(2 * closest)[0::2][: n_heads - closest]


def alibi_bias(seq_len, slope, dtype=np.float64):
    """``slope * (j - i)`` on and below the diagonal, ``-inf`` above it."""
    pos = np.arange(seq_len)
    rel = (pos[None, :] - pos[:, None]).astype(dtype)
    bias = np.asarray(slope, dtype=dtype) * rel
    bias[rel > 0] = -np.inf
    return bias


def alibi_bias_heads(seq_len, n_heads, dtype=np.float32):
    return np.stack([alibi_bias(seq_len, m, dtype=np.float64) for m in alibi_slopes(n_heads)]).astype(dtype)


def rmsnorm(x, gain, eps):
    """``gain * x / sqrt(mean(x**2) + eps)`` over the last axis.

    A zero denominator (all-zero row with eps=0) maps to a zero row.
    """
    x = as_tensor(x)
    gain = as_tensor(gain, like=x)
    xd = x.data
    ms = np.mean(xd * xd, axis=-1, keepdims=True) + np.asarray(eps, dtype=xd.dtype)
    safe = ms > 0
    r = np.where(safe, 1.0 / np.sqrt(np.where(safe, ms, 1.0)), 0.0).astype(xd.dtype)
    xhat = xd * r
    out = gain.data * xhat
    d = xd.shape[-1]

    def backward(g):
        gg = g * gain.data
        dot = np.sum(gg * xd, axis=-1, keepdims=True)
        gx = r * gg - xd * (r * r * r) * (dot / d)
        ggain = (g * xhat).reshape(-1, d).sum(axis=0) if gain.requires_grad else None
        return gx, ggain

    return record(out, (x, gain), backward, "rmsnorm")


def swiglu_ff(x, w_gate, w_up, w_down):
    """``(silu(x @ w_gate) * (x @ w_up)) @ w_down``."""
    x, w_gate, w_up, w_down = (as_tensor(t) for t in (x, w_gate, w_up, w_down))
    if w_gate.shape != w_up.shape:
        raise ShapeMismatch(f"gate {w_gate.shape} and up {w_up.shape} differ")
    if w_down.shape != (w_gate.shape[1], w_gate.shape[0]):
        raise ShapeMismatch(f"down projection {w_down.shape} does not invert {w_gate.shape}")
    squeeze = x.ndim == 1
    if squeeze:
        x = reshape(x, (1, x.shape[0]))
    hidden = mul(silu(matmul(x, w_gate)), matmul(x, w_up))
    out = matmul(hidden, w_down)
    if squeeze:
        out = reshape(out, (out.shape[-1],))
    return out
