"""Decoder-only transformer: ALiBi attention, pre-norm RMSNorm, SwiGLU."""

import hashlib
import math

import numpy as np

from ..errors import SequenceTooLong, ShapeMismatch, TokenOutOfRange
from ..numerics import Tensor, add, embedding, matmul, mul, reshape, softmax, transpose
from .config import ModelConfig
from .layers import alibi_bias_heads, rmsnorm, swiglu_ff

LAYER_PARAMS = ("attn_norm", "wq", "wk", "wv", "wo", "ffn_norm", "w_gate", "w_up", "w_down")


def param_shapes(cfg):
    """Ordered ``(name, shape)`` for every parameter of ``cfg``."""
    d, f, v = cfg.d_model, cfg.d_ff, cfg.vocab_size
    shapes = [("tok_emb", (v, d))]
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        shapes += [
            (p + "attn_norm", (d,)),
            (p + "wq", (d, d)),
            (p + "wk", (d, d)),
            (p + "wv", (d, d)),
            (p + "wo", (d, d)),
            (p + "ffn_norm", (d,)),
            (p + "w_gate", (d, f)),
            (p + "w_up", (d, f)),
            (p + "w_down", (f, d)),
        ]
    shapes += [("final_norm", (d,)), ("lm_head", (d, v))]
    return shapes


def count_parameters(cfg):
    return sum(int(np.prod(s)) for _, s in param_shapes(cfg))


def validate_tokens(tokens, cfg):
    tokens = np.asarray(tokens)
    if tokens.ndim == 1:
        tokens = tokens[None, :]
    if tokens.ndim != 2:
        raise ShapeMismatch(f"tokens must be [B, T], got shape {tokens.shape}")
    if not np.issubdtype(tokens.dtype, np.integer):
        raise TokenOutOfRange("token ids must be integers")
    if tokens.shape[1] > cfg.max_seq_len:
        raise SequenceTooLong(f"sequence length {tokens.shape[1]} exceeds max_seq_len {cfg.max_seq_len}")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= cfg.vocab_size):
        raise TokenOutOfRange(f"token ids must lie in [0, {cfg.vocab_size})")
    return tokens.astype(np.int64, copy=False)


class TransformerModel:
    def __init__(self, cfg: ModelConfig, params=None, seed=0, dtype=np.float32):
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        if params is None:
            params = init_params(cfg, seed, dtype=self.dtype)
        self.params = {}
        for name, shape in param_shapes(cfg):
            arr = np.asarray(params[name])
            if arr.shape != shape:
                raise ShapeMismatch(f"{name}: expected {shape}, got {arr.shape}")
            self.params[name] = Tensor(arr.astype(self.dtype), requires_grad=True, name=name)
        self._bias_cache = {}

    # -- properties the eval harness relies on
    @property
    def vocab_size(self):
        return self.cfg.vocab_size

    @property
    def max_seq_len(self):
        return self.cfg.max_seq_len

    def parameters(self):
        return list(self.params.values())

    def named_parameters(self):
        return list(self.params.items())

    def num_parameters(self):
        return sum(p.data.size for p in self.params.values())

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state_dict(self, state):
        for name, t in self.params.items():
            arr = np.asarray(state[name])
            if arr.shape != t.shape:
                raise ShapeMismatch(f"{name}: expected {t.shape}, got {arr.shape}")
            t.data = arr.astype(self.dtype, copy=True)

    def astype(self, dtype):
        """Copy of the model with parameters cast to ``dtype`` (float64 for gradient checks)."""
        return TransformerModel(self.cfg, params=self.state_dict(), dtype=dtype)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def digest(self):
        h = hashlib.sha256()
        for name, t in self.params.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()

    def _bias(self, seq_len):
        bias = self._bias_cache.get(seq_len)
        if bias is None:
            bias = alibi_bias_heads(seq_len, self.cfg.n_heads, dtype=self.dtype)
            self._bias_cache[seq_len] = bias
        return bias

    def forward(self, tokens, capture=None):
        """Logits ``[B, T, vocab_size]``. ``capture`` (a dict) receives per-layer attention scores."""
        cfg = self.cfg
        tokens = validate_tokens(tokens, cfg)
        B, T = tokens.shape
        H, dh = cfg.n_heads, cfg.head_dim
        P = self.params
        bias = Tensor(self._bias(T))
        scale = 1.0 / math.sqrt(dh)

        x = embedding(P["tok_emb"], tokens)
        for i in range(cfg.n_layers):
            p = f"layers.{i}."
            h = rmsnorm(x, P[p + "attn_norm"], cfg.rms_eps)
            q = transpose(reshape(matmul(h, P[p + "wq"]), (B, T, H, dh)), (0, 2, 1, 3))
            k = transpose(reshape(matmul(h, P[p + "wk"]), (B, T, H, dh)), (0, 2, 3, 1))
            v = transpose(reshape(matmul(h, P[p + "wv"]), (B, T, H, dh)), (0, 2, 1, 3))
            scores = add(mul(matmul(q, k), scale), bias)
            if capture is not None:
                capture[f"scores.{i}"] = scores.data.copy()
            att = softmax(scores)
            o = reshape(transpose(matmul(att, v), (0, 2, 1, 3)), (B, T, cfg.d_model))
            x = add(x, matmul(o, P[p + "wo"]))
            h = rmsnorm(x, P[p + "ffn_norm"], cfg.rms_eps)
            x = add(x, swiglu_ff(h, P[p + "w_gate"], P[p + "w_up"], P[p + "w_down"]))
        x = rmsnorm(x, P["final_norm"], cfg.rms_eps)
        return matmul(x, P["lm_head"])

    __call__ = forward

    def logits(self, tokens):
        """Plain numpy logits; nothing is recorded."""
        return self.forward(tokens).data


def init_params(cfg, seed=0, dtype=np.float32):
    """Normal(0, std) projections, unit gains, residual outputs scaled by 1/sqrt(2 L)."""
    rng = np.random.default_rng(seed)
    resid = 1.0 / math.sqrt(2 * cfg.n_layers)
    params = {}
    for name, shape in param_shapes(cfg):
        leaf = name.rsplit(".", 1)[-1]
        if leaf.endswith("norm"):
            arr = np.ones(shape)
        else:
            arr = rng.normal(0.0, cfg.init_std, size=shape)
            if leaf in ("wo", "w_down"):
                arr *= resid
        params[name] = arr.astype(dtype)
    return params


def greedy_decode(model, tokens, max_new_tokens, stop_token=None):
    """Append argmax tokens one at a time (no KV cache)."""
    seq = [int(t) for t in np.asarray(tokens).reshape(-1)]
    out = []
    for _ in range(max_new_tokens):
        window = seq[-model.max_seq_len :]
        nxt = int(np.argmax(model.logits(np.array([window]))[0, -1]))
        if stop_token is not None and nxt == stop_token:
            break
        seq.append(nxt)
        out.append(nxt)
    return out
