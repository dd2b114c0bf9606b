"""Differentiable ops. Each returns a new Tensor and, under an active tape,
records a backward rule mapping the output gradient to input gradients."""

import numpy as np

from ..errors import InvalidDistribution, ShapeMismatch
from .tensor import Tensor, as_tensor, record


def _swap(x):
    return np.swapaxes(x, -1, -2)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatch(f"matmul needs >=2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch(f"matmul inner dims differ: {a.shape} x {b.shape}")
    flat = b.ndim == 2
    if flat:
        # one gemm over all leading dims
        k, n = b.shape
        a2 = a.data.reshape(-1, k)
        out = (a2 @ b.data).reshape(a.shape[:-1] + (n,))
    else:
        out = np.matmul(a.data, b.data)

    def backward(g):
        ga = gb = None
        if flat:
            g2 = g.reshape(-1, n)
            if a.requires_grad:
                ga = (g2 @ b.data.T).reshape(a.shape)
            if b.requires_grad:
                gb = a2.T @ g2
        else:
            if a.requires_grad:
                ga = np.matmul(g, _swap(b.data))
            if b.requires_grad:
                gb = np.matmul(_swap(a.data), g)
        return ga, gb

    return record(out, (a, b), backward, "matmul")


def add(a, b):
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data + b.data

    def backward(g):
        return g, g

    return record(out, (a, b), backward, "add")


def mul(a, b):
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        c = np.asarray(b, dtype=a.dtype)

        def backward_const(g):
            return (g * c,)

        return record(a.data * c, (a,), backward_const, "mul")
    out = a.data * b.data

    def backward(g):
        return g * b.data, g * a.data

    return record(out, (a, b), backward, "mul")


def embedding(weight, ids):
    """Row gather ``weight[ids]``; gradient scatters back with a sequential add."""
    ids = np.asarray(ids, dtype=np.int64)
    out = weight.data[ids]

    def backward(g):
        gw = np.zeros_like(weight.data)
        np.add.at(gw, ids.reshape(-1), g.reshape(-1, weight.shape[-1]))
        return (gw,)

    return record(out, (weight,), backward, "embedding")


def softmax_np(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - m)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax_np(x, axis=-1):
    m = np.max(x, axis=axis, keepdims=True)
    z = x - m
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def softmax(x, axis=-1):
    s = softmax_np(x.data, axis)

    def backward(g):
        return (s * (g - np.sum(g * s, axis=axis, keepdims=True)),)

    return record(s, (x,), backward, "softmax")


def check_distribution(target, atol=1e-6):
    target = np.asarray(target, dtype=np.float64)
    if np.any(target < 0) or not np.all(np.isfinite(target)):
        raise InvalidDistribution("target has negative or non-finite entries")
    sums = target.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > atol):
        worst = float(sums.flat[np.argmax(np.abs(sums - 1.0))])
        raise InvalidDistribution(f"target rows must sum to 1, found {worst:.6g}")
    return target


def cross_entropy(logits, target):
    """Mean over positions of ``-sum_v target_v * log softmax(logits)_v``.

    ``target`` is either integer class ids shaped ``logits.shape[:-1]`` or a
    distribution shaped like ``logits``.
    """
    logits = as_tensor(logits)
    target = np.asarray(target)
    lsm = log_softmax_np(logits.data)
    n = max(1, int(np.prod(logits.shape[:-1])))
    if np.issubdtype(target.dtype, np.integer):
        if target.shape != logits.shape[:-1]:
            raise ShapeMismatch(f"class targets {target.shape} vs logits {logits.shape}")
        picked = np.take_along_axis(lsm, target[..., None], axis=-1)
        loss = -picked.sum() / n

        def backward(g):
            grad = np.exp(lsm)
            np.put_along_axis(grad, target[..., None], np.take_along_axis(grad, target[..., None], -1) - 1, -1)
            return (grad * (g / n),)

    else:
        if target.shape != logits.shape:
            raise ShapeMismatch(f"distribution targets {target.shape} vs logits {logits.shape}")
        target = check_distribution(target).astype(logits.dtype)
        loss = -(target * lsm).sum() / n

        def backward(g):
            return ((np.exp(lsm) - target) * (g / n),)

    return record(np.asarray(loss, dtype=logits.dtype), (logits,), backward, "cross_entropy")


def _sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def silu(x):
    sig = _sigmoid(x.data)

    def backward(g):
        return (g * (sig * (1.0 + x.data * (1.0 - sig))),)

    return record(x.data * sig, (x,), backward, "silu")


def reshape(x, shape):
    old = x.shape

    def backward(g):
        return (g.reshape(old),)

    return record(x.data.reshape(shape), (x,), backward, "reshape")


def transpose(x, axes=None):
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inv),)

    return record(np.transpose(x.data, axes), (x,), backward, "transpose")


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    out = np.sum(x.data, axis=axis, keepdims=keepdims)
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return record(np.asarray(out), (x,), backward, "sum")


def mean(x, axis=None, keepdims=False):
    count = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)
