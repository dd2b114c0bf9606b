"""Minimum cross-entropy over {ground truth} and teacher distributions."""

import numpy as np

from ..errors import VocabMismatch
from ..numerics import Tensor, record
from ..numerics.tensor import as_tensor

GRANULARITIES = ("token", "sequence", "batch")


def kd_schedule(step, period=4):
    """True on every ``period``-th step (steps are 1-based)."""
    if step < 1:
        raise ValueError(f"steps are 1-based, got {step}")
    if period < 1:
        raise ValueError("period must be >= 1")
    return step % period == 0


def _log_softmax64(logits):
    x = np.asarray(logits, dtype=np.float64)
    z = x - x.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def branch_losses(logits, targets, teacher_dists):
    """Per-position CE for each branch, shape ``[1 + n_teachers, B, T]`` (float64).

    Branch 0 is the one-hot ground truth; branch j is teacher j over its
    renormalized top-k support.
    """
    lsm = _log_softmax64(logits)
    targets = np.asarray(targets, dtype=np.int64)
    V = lsm.shape[-1]
    if targets.shape != lsm.shape[:-1]:
        raise VocabMismatch(f"targets {targets.shape} do not match logits {lsm.shape}")
    out = [-np.take_along_axis(lsm, targets[..., None], axis=-1)[..., 0]]
    for dist in teacher_dists:
        if dist.shape != targets.shape:
            raise VocabMismatch(f"teacher positions {dist.shape} != targets {targets.shape}")
        if dist.ids.size and dist.ids.max() >= V:
            raise VocabMismatch("teacher token ids exceed the student vocabulary")
        q = dist.renormalized()
        out.append(-(q * np.take_along_axis(lsm, dist.ids, axis=-1)).sum(axis=-1))
    return np.stack(out)


def select_branches(ce, granularity="token"):
    """Winning branch per position; ties go to the lowest branch index."""
    if granularity == "token":
        return np.argmin(ce, axis=0)
    if granularity == "sequence":
        win = np.argmin(ce.sum(axis=2), axis=0)
        return np.broadcast_to(win[:, None], ce.shape[1:]).copy()
    if granularity == "batch":
        win = int(np.argmin(ce.reshape(ce.shape[0], -1).sum(axis=1)))
        return np.full(ce.shape[1:], win, dtype=np.int64)
    raise ValueError(f"granularity must be one of {GRANULARITIES}")


def winner_targets(branch, targets, teacher_dists, vocab_size):
    """Dense target distribution ``[B, T, V]`` taken from each position's winning branch."""
    B, T = branch.shape
    dense = np.zeros((B, T, vocab_size), dtype=np.float64)
    gt = branch == 0
    b_idx, t_idx = np.nonzero(gt)
    dense[b_idx, t_idx, targets[gt]] = 1.0
    for j, dist in enumerate(teacher_dists, start=1):
        sel = branch == j
        if not sel.any():
            continue
        q = dist.renormalized()[sel]
        b_idx, t_idx = np.nonzero(sel)
        dense[b_idx[:, None], t_idx[:, None], dist.ids[sel]] = q
    return dense


def min_ce_loss(student_logits, targets, teacher_dists=(), granularity="token"):
    """Mean over positions of the minimum branch cross-entropy.

    Returns ``(loss, branch_selected, plain_ce)``: ``loss`` is a Tensor whose
    gradient flows only through each position's winning branch,
    ``branch_selected`` is ``[B, T]`` (0 = ground truth, j = teacher j) and
    ``plain_ce`` is the ground-truth-only loss as a float computed with the same
    reduction, so ``loss <= plain_ce`` holds exactly.
    """
    logits = as_tensor(student_logits)
    targets = np.asarray(targets, dtype=np.int64)
    teacher_dists = list(teacher_dists)
    ce = branch_losses(logits.data, targets, teacher_dists)
    branch = select_branches(ce, granularity)
    chosen = np.take_along_axis(ce, branch[None], axis=0)[0]
    n = chosen.size
    value = chosen.sum() / n
    plain = ce[0].sum() / n
    V = logits.shape[-1]

    def backward(g):
        dense = winner_targets(branch, targets, teacher_dists, V)
        p = np.exp(_log_softmax64(logits.data))
        return (((p - dense) * (float(g) / n)).astype(logits.dtype),)

    loss = record(np.asarray(value, dtype=np.float64), (logits,), backward, "min_ce_loss")
    return loss, branch, float(plain)
