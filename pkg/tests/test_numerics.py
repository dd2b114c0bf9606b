import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lokiforge.errors import InvalidDistribution, NonScalarLoss, ShapeMismatch, TapeReused
from lokiforge.numerics import (
    Tape,
    Tensor,
    add,
    backward,
    cross_entropy,
    embedding,
    gradcheck,
    matmul,
    mean,
    mul,
    reshape,
    silu,
    softmax,
    sum,
    transpose,
)

N_SHAPES = 100
TOL = 1e-3


def _dims(rng, n, lo=1, hi=5):
    return tuple(int(d) for d in rng.integers(lo, hi + 1, size=n))


def _weighted(out, w):
    # a random linear functional makes every output coordinate matter
    return sum(mul(out, w))


def case_matmul(rng):
    m, k, n = _dims(rng, 3)
    batch = _dims(rng, int(rng.integers(0, 2)))
    a = rng.normal(size=batch + (m, k))
    b = rng.normal(size=(k, n)) if rng.random() < 0.5 else rng.normal(size=batch + (k, n))
    w = rng.normal(size=np.broadcast_shapes(a.shape[:-1] + (n,), b.shape[:-2] + (m, n)))
    return lambda a, b: _weighted(matmul(a, b), w), [a, b]


def case_add(rng):
    shape = _dims(rng, int(rng.integers(1, 4)))
    other = tuple(1 if rng.random() < 0.4 else d for d in shape)[int(rng.integers(0, len(shape))):]
    a, b = rng.normal(size=shape), rng.normal(size=other)
    w = rng.normal(size=shape)
    return lambda a, b: _weighted(add(a, b), w), [a, b]


def case_mul(rng):
    shape = _dims(rng, int(rng.integers(1, 4)))
    a, b = rng.normal(size=shape), rng.normal(size=shape[-1:])
    w = rng.normal(size=shape)
    return lambda a, b: _weighted(mul(mul(a, b), 1.7), w), [a, b]


def case_embedding(rng):
    V, d = _dims(rng, 2, 2, 6)
    ids = rng.integers(0, V, size=_dims(rng, 2))
    w = rng.normal(size=ids.shape + (d,))
    return lambda table: _weighted(embedding(table, ids), w), [rng.normal(size=(V, d))]


def case_softmax(rng):
    shape = _dims(rng, int(rng.integers(1, 4)))
    w = rng.normal(size=shape)
    return lambda x: _weighted(softmax(x), w), [rng.normal(size=shape) * 2]


def case_cross_entropy(rng):
    lead = _dims(rng, int(rng.integers(1, 3)))
    V = int(rng.integers(2, 7))
    logits = rng.normal(size=lead + (V,)) * 2
    if rng.random() < 0.5:
        target = rng.integers(0, V, size=lead)
    else:
        target = rng.dirichlet(np.ones(V), size=lead)
    return lambda x: cross_entropy(x, target), [logits]


def case_silu(rng):
    shape = _dims(rng, int(rng.integers(1, 4)))
    w = rng.normal(size=shape)
    return lambda x: _weighted(silu(x), w), [rng.normal(size=shape) * 3]


def case_reshape_transpose(rng):
    a, b, c = _dims(rng, 3)
    w = rng.normal(size=(c, a * b))
    return lambda x: _weighted(reshape(transpose(x, (2, 0, 1)), (c, a * b)), w), [rng.normal(size=(a, b, c))]


def case_sum_mean(rng):
    shape = _dims(rng, 3)
    axis = int(rng.integers(0, 3))
    w = rng.normal(size=shape[:axis] + shape[axis + 1 :])
    return lambda x: add(_weighted(mean(x, axis=axis), w), sum(x)), [rng.normal(size=shape)]


CASES = {
    "matmul": case_matmul,
    "add": case_add,
    "mul": case_mul,
    "embedding": case_embedding,
    "softmax": case_softmax,
    "cross_entropy": case_cross_entropy,
    "silu": case_silu,
    "reshape_transpose": case_reshape_transpose,
    "sum_mean": case_sum_mean,
}


@pytest.mark.parametrize("op", sorted(CASES))
def test_gradcheck_random_shapes(op):
    rng = np.random.default_rng(zlib.crc32(op.encode()))
    worst = 0.0
    for _ in range(N_SHAPES):
        fn, arrays = CASES[op](rng)
        worst = max(worst, gradcheck(fn, arrays, n_coords=10, rng=rng))
    assert worst < TOL, f"{op}: worst relative error {worst:.2e}"


# ---------------------------------------------------------------- examples


def test_matmul_examples():
    eye = Tensor(np.eye(2))
    m = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(eye, m).data, m.data)
    assert matmul(m, Tensor([[1.0], [1.0]])).data.tolist() == [[3.0], [7.0]]
    with pytest.raises(ShapeMismatch):
        matmul(Tensor(np.ones((1, 3))), Tensor(np.ones((2, 4))))


def test_softmax_examples():
    assert np.allclose(softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])
    np.testing.assert_allclose(softmax(Tensor([math.log(2), 0.0])).data, [2 / 3, 1 / 3], atol=1e-7)
    out = softmax(Tensor([1000.0, 0.0])).data
    assert np.all(np.isfinite(out))
    assert out.tolist() == [1.0, 0.0]


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=30))
@settings(max_examples=200, deadline=None)
def test_softmax_slices_sum_to_one_and_positive(xs):
    p = softmax(Tensor(np.array(xs))).data
    assert abs(float(p.sum()) - 1.0) <= 1e-6
    assert np.all(p > 0)


def test_cross_entropy_examples():
    assert abs(float(cross_entropy(Tensor([0.0, 0.0]), np.array(0)).data) - 0.693147) < 1e-6
    logits = Tensor(np.log([0.7, 0.1, 0.1, 0.1]))
    assert abs(float(cross_entropy(logits, np.array(1)).data) - 2.302585) < 1e-6
    with pytest.raises(InvalidDistribution):
        cross_entropy(Tensor([0.0, 0.0]), np.array([0.6, 0.6]))
    with pytest.raises(InvalidDistribution):
        cross_entropy(Tensor([0.0, 0.0]), np.array([1.2, -0.2]))


def test_tensors_default_to_float32():
    t = Tensor([1, 2, 3])
    assert t.dtype == np.float32
    assert Tensor(np.zeros(2, dtype=np.float64)).dtype == np.float64


def test_backward_sum_gives_ones():
    x = Tensor(np.random.default_rng(0).normal(size=(2, 3, 4)), requires_grad=True)
    with Tape() as tape:
        loss = sum(x)
    backward(loss, tape)
    assert np.array_equal(x.grad, np.ones((2, 3, 4), dtype=np.float32))


def test_backward_cross_entropy_closed_form():
    rng = np.random.default_rng(1)
    x = Tensor(rng.normal(size=5), requires_grad=True)
    with Tape() as tape:
        loss = cross_entropy(x, np.array(2))
    backward(loss, tape)
    p = np.exp(x.data - x.data.max())
    p /= p.sum()
    want = p.copy()
    want[2] -= 1
    np.testing.assert_allclose(x.grad, want, atol=1e-6)


def test_tape_reuse_and_nonscalar_errors():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        y = mul(x, x)
        loss = sum(y)
    with pytest.raises(NonScalarLoss):
        backward(y, tape)
    backward(loss, tape)
    with pytest.raises(TapeReused):
        backward(loss, tape)


def test_backward_visits_in_reverse_topological_order():
    rng = np.random.default_rng(2)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
    with Tape() as tape:
        h = silu(matmul(a, b))
        loss = add(sum(softmax(h)), mean(mul(h, h)))
    position = {id(n.out): i for i, n in enumerate(tape.nodes)}
    for i, node in enumerate(tape.nodes):
        for t in node.inputs:
            assert position.get(id(t), -1) < i
    visited = []
    backward(loss, tape, on_visit=lambda i, node: visited.append(i))
    assert visited == sorted(visited, reverse=True)
    assert len(set(visited)) == len(visited)


def test_ops_without_tape_record_nothing():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = mul(x, x)
    assert not y.requires_grad


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_forward_stays_finite_on_finite_inputs(seed):
    rng = np.random.default_rng(seed)
    x = Tensor(rng.normal(size=(3, 7)) * 30)
    w = Tensor(rng.normal(size=(7, 5)))
    out = softmax(silu(matmul(x, w)))
    ce = cross_entropy(matmul(x, w), rng.integers(0, 5, size=3))
    assert np.all(np.isfinite(out.data)) and np.isfinite(ce.data)
