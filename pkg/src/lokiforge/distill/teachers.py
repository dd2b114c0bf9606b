"""Teacher contract: token batches in, per-position top-k distributions out."""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..errors import VocabMismatch

DEFAULT_TOP_K = 64


@dataclass
class TeacherDistribution:
    """Top-k teacher probabilities per position.

    ``probs`` are the teacher's raw softmax values for ``ids`` (descending), so
    ``probs.sum(-1) + tail_mass == 1``. Loss code uses :meth:`renormalized`.
    """

    ids: np.ndarray  # [B, T, k] int64
    probs: np.ndarray  # [B, T, k] float32
    tail_mass: np.ndarray  # [B, T] float32

    @property
    def k(self):
        return self.ids.shape[-1]

    @property
    def shape(self):
        return self.ids.shape[:-1]

    def renormalized(self):
        p = self.probs.astype(np.float64)
        return p / p.sum(axis=-1, keepdims=True)

    def check(self, atol=1e-5):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if np.any(np.diff(self.probs, axis=-1) > 0):
            raise ValueError("top-k probabilities must be descending")
        total = self.probs.astype(np.float64).sum(-1) + self.tail_mass
        if np.any(np.abs(total - 1.0) > atol):
            raise ValueError("top-k mass plus tail mass must equal 1")
        return self


def topk_distribution(logits, k=DEFAULT_TOP_K, temperature=1.0):
    """Truncate ``softmax(logits / temperature)`` to its ``k`` largest entries.

    Ties keep the lower token id.
    """
    logits = np.asarray(logits, dtype=np.float64) / temperature
    z = logits - logits.max(axis=-1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=-1, keepdims=True)
    k = min(int(k), p.shape[-1])
    order = np.argsort(-p, axis=-1, kind="stable")[..., :k]
    top = np.take_along_axis(p, order, axis=-1)
    if k == p.shape[-1]:
        tail = np.zeros(top.shape[:-1])  # nothing truncated
    else:
        tail = np.clip(1.0 - top.sum(axis=-1), 0.0, 1.0)
    return TeacherDistribution(order.astype(np.int64), top.astype(np.float32), tail.astype(np.float32))


class Teacher(Protocol):
    vocab_size: int

    def __call__(self, tokens, seq_ids=None) -> TeacherDistribution: ...


class ModelTeacher:
    """Any object with ``logits(tokens)`` and ``vocab_size`` (e.g. a TransformerModel)."""

    def __init__(self, model, k=DEFAULT_TOP_K, temperature=1.0, name=None):
        self.model = model
        self.k = k
        self.temperature = temperature
        self.name = name or type(model).__name__

    @property
    def vocab_size(self):
        return self.model.vocab_size

    def __call__(self, tokens, seq_ids=None):
        return topk_distribution(self.model.logits(np.asarray(tokens)), self.k, self.temperature)


def teacher_logits(teacher, tokens, vocab_size, seq_ids=None):
    """Query ``teacher`` after checking it shares the student's vocabulary."""
    if teacher.vocab_size != vocab_size:
        raise VocabMismatch(f"teacher vocab {teacher.vocab_size} != student vocab {vocab_size}")
    tokens = np.asarray(tokens)
    dist = teacher(tokens, seq_ids)
    if dist.shape != tokens.shape:
        raise VocabMismatch(f"teacher returned positions {dist.shape} for tokens {tokens.shape}")
    if dist.ids.size and dist.ids.max() >= vocab_size:
        raise VocabMismatch("teacher emitted token ids outside the shared vocabulary")
    return dist
