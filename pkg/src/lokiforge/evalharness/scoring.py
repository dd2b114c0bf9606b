"""Log-likelihood scoring and perplexity.

Anything with ``logits(tokens [B, T]) -> [B, T, V]``, ``vocab_size`` and
``max_seq_len`` can be scored; :class:`TransformerModel` qualifies.
"""

import math

import numpy as np

from ..errors import SequenceTooLong, TokenOutOfRange
from ..numerics import log_softmax_np

NORMALIZATIONS = ("mean", "sum")


class UniformModel:
    """Reference model whose logits are all zero."""

    def __init__(self, vocab_size, max_seq_len=1 << 16):
        self.vocab_size = int(vocab_size)
        self.max_seq_len = int(max_seq_len)

    def logits(self, tokens):
        tokens = np.asarray(tokens)
        return np.zeros(tokens.shape + (self.vocab_size,), dtype=np.float64)


def _check(model, prompt, option):
    if len(option) < 1:
        raise ValueError("option must contain at least one token")
    if len(prompt) < 1:
        raise ValueError("prompt must contain at least one token")
    n = len(prompt) + len(option) - 1
    if n > model.max_seq_len:
        raise SequenceTooLong(f"prompt + option needs {n} positions, model allows {model.max_seq_len}")


def _option_logprobs(logp_row, prompt_len, option):
    # option token j sits at position prompt_len + j and is predicted one step earlier
    pos = np.arange(prompt_len - 1, prompt_len - 1 + len(option))
    return logp_row[pos, np.asarray(option, dtype=np.int64)]


def _reduce(lp, normalize):
    if normalize == "mean":
        return float(np.mean(lp))
    if normalize == "sum":
        return float(np.sum(lp))
    raise ValueError(f"normalize must be one of {NORMALIZATIONS}")


def score_option(model, prompt, option, normalize="mean"):
    """Mean (or summed) log-probability of ``option`` tokens given ``prompt``."""
    prompt, option = list(prompt), list(option)
    _check(model, prompt, option)
    seq = np.array([(prompt + option)[:-1]], dtype=np.int64)
    logp = log_softmax_np(np.asarray(model.logits(seq), dtype=np.float64))[0]
    return _reduce(_option_logprobs(logp, len(prompt), option), normalize)


def score_options(model, prompt, options, normalize="mean"):
    """Score every option in one right-padded batch (causality makes padding inert)."""
    prompt = list(prompt)
    options = [list(o) for o in options]
    for o in options:
        _check(model, prompt, o)
    width = max(len(prompt) + len(o) - 1 for o in options)
    batch = np.zeros((len(options), width), dtype=np.int64)
    for r, o in enumerate(options):
        row = (prompt + o)[:-1]
        batch[r, : len(row)] = row
    logp = log_softmax_np(np.asarray(model.logits(batch), dtype=np.float64))
    return [_reduce(_option_logprobs(logp[r], len(prompt), o), normalize) for r, o in enumerate(options)]


def perplexity(model, tokens, batch_size=8):
    """``2 ** `` mean next-token cross-entropy in bits over a token stream.

    ``tokens`` is an id array or a :class:`Shard`. The stream is cut into
    chunks of ``max_seq_len + 1`` overlapping by one token, so every position
    after the first is predicted exactly once.
    """
    if hasattr(tokens, "tokens"):
        tokens = tokens.tokens
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size < 2:
        raise ValueError("need at least two tokens")
    if tokens.min() < 0 or tokens.max() >= model.vocab_size:
        raise TokenOutOfRange(f"token ids must lie in [0, {model.vocab_size})")
    L = model.max_seq_len
    starts = list(range(0, tokens.size - 1, L))
    total, count = [], 0
    for i in range(0, len(starts), batch_size):
        group = starts[i : i + batch_size]
        # chunks of unequal length (the tail) are scored separately
        by_len = {}
        for s in group:
            by_len.setdefault(min(L, tokens.size - 1 - s), []).append(s)
        for n, ss in by_len.items():
            x = np.stack([tokens[s : s + n] for s in ss])
            y = np.stack([tokens[s + 1 : s + n + 1] for s in ss])
            bits = _log2_softmax(np.asarray(model.logits(x), dtype=np.float64))
            picked = np.take_along_axis(bits, y[..., None], axis=-1)[..., 0]
            total.append(-picked.ravel())
            count += picked.size
    # base 2 keeps power-of-two vocabularies exact for a uniform model
    return 2.0 ** (math.fsum(np.concatenate(total).tolist()) / count)


def _log2_softmax(x):
    z = x - x.max(axis=-1, keepdims=True)
    return z / math.log(2.0) - np.log2(np.exp(z).sum(axis=-1, keepdims=True))
