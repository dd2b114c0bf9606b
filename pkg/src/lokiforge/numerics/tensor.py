"""Tensor and Tape: the reverse-mode recording core."""

import threading

import numpy as np

from ..errors import NonScalarLoss, TapeReused

_state = threading.local()


def active_tape():
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


class Tensor:
    """A float array that may carry a gradient.

    Data is float32 unless built from float64 input (the gradient-check shadow
    mode); ops keep whatever floating dtype their inputs have.
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data)
        if arr.dtype != np.float64:
            arr = arr.astype(np.float32, copy=False)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # operator sugar; the functional forms live in ``ops``
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops

        return ops.mul(self, -1.0)

    def __sub__(self, other):
        from . import ops

        return ops.add(self, ops.mul(as_tensor(other, like=self), -1.0))

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)


def as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x)
    if like is not None:
        arr = arr.astype(like.dtype, copy=False)
    return Tensor(arr)


class Node:
    __slots__ = ("out", "inputs", "backward", "op")

    def __init__(self, out, inputs, backward, op):
        self.out = out
        self.inputs = inputs
        self.backward = backward
        self.op = op


class Tape:
    """Ordered record of differentiable ops.

    Use as a context manager; ops executed inside it are appended in execution
    order, which is a topological order by construction. One backward pass per
    tape.
    """

    def __init__(self):
        self.nodes = []
        self.used = False

    def __enter__(self):
        if not hasattr(_state, "stack"):
            _state.stack = []
        _state.stack.append(self)
        return self

    def __exit__(self, *exc):
        _state.stack.pop()
        return False

    def record(self, out, inputs, backward, op):
        if self.used:
            raise TapeReused("tape already consumed by backward()")
        self.nodes.append(Node(out, tuple(inputs), backward, op))

    def backward(self, loss, on_visit=None):
        return backward(loss, self, on_visit=on_visit)


def record(out_data, inputs, backward_fn, op):
    """Wrap ``out_data`` and put it on the active tape if any input needs a gradient."""
    tape = active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        tape.record(out, inputs, backward_fn, op)
    return out


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss, tape, on_visit=None):
    """Accumulate d loss / d t into ``t.grad`` for every requires-grad tensor on ``tape``.

    ``on_visit(index, node)`` is called for each node in visiting order.
    """
    if tape.used:
        raise TapeReused("backward() already ran on this tape")
    if loss.data.size != 1 or loss.data.ndim > 1:
        raise NonScalarLoss(f"loss must be a scalar, got shape {loss.shape}")
    tape.used = True
    grads = {id(loss): np.ones_like(loss.data)}
    seen = {id(loss): loss}
    for index in range(len(tape.nodes) - 1, -1, -1):
        node = tape.nodes[index]
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        if on_visit is not None:
            on_visit(index, node)
        node.out.grad = g
        in_grads = node.backward(g)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            gi = _unbroadcast(gi, t.shape)
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
                seen[key] = t
    # whatever is left belongs to leaves
    for key, g in grads.items():
        t = seen[key]
        t.grad = g if t.grad is None else t.grad + g
    return loss
