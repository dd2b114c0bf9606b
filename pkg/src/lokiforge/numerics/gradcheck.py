"""Central finite-difference oracle for gradient verification (float64)."""

import numpy as np

from .tensor import Tape, Tensor, backward


def relative_error(analytic, numeric, floor=1e-6):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def analytic_grads(fn, arrays):
    """Gradients of scalar ``fn(*tensors)`` with respect to each array, via the tape."""
    tensors = [Tensor(np.array(a, dtype=np.float64), requires_grad=True) for a in arrays]
    with Tape() as tape:
        loss = fn(*tensors)
    backward(loss, tape)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]


def numeric_grad(fn, arrays, which, index, h=1e-5):
    """Central difference of ``fn`` in coordinate ``index`` of input ``which``."""
    base = [np.array(a, dtype=np.float64) for a in arrays]
    plus = [a.copy() for a in base]
    minus = [a.copy() for a in base]
    plus[which][index] += h
    minus[which][index] -= h
    fp = float(fn(*[Tensor(a) for a in plus]).data)
    fm = float(fn(*[Tensor(a) for a in minus]).data)
    return (fp - fm) / (2.0 * h)


def gradcheck(fn, arrays, n_coords=10, rng=None, h=1e-5, floor=1e-6):
    """Max relative error between tape gradients and finite differences.

    ``n_coords`` random coordinates are drawn for each input array.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = analytic_grads(fn, arrays)
    worst = 0.0
    for which, arr in enumerate(arrays):
        for _ in range(n_coords):
            index = tuple(int(rng.integers(s)) for s in arr.shape)
            num = numeric_grad(fn, arrays, which, index, h=h)
            worst = max(worst, relative_error(float(grads[which][index]), num, floor))
    return worst
