"""The numba kernels and their numpy twins must agree exactly."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lokiforge import kernels
from lokiforge._accel import HAVE_NUMBA

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")

small_ids = st.lists(st.integers(0, 3), min_size=0, max_size=60).map(lambda v: np.array(v, dtype=np.int32))


def merge_oracle(ids, left, right, new):
    out, i = [], 0
    while i < len(ids):
        if i + 1 < len(ids) and ids[i] == left and ids[i + 1] == right:
            out.append(new)
            i += 2
        else:
            out.append(int(ids[i]))
            i += 1
    return out


@given(small_ids, st.integers(0, 3), st.integers(0, 3))
@settings(max_examples=200, deadline=None)
def test_merge_pair_paths_agree(ids, left, right):
    want = merge_oracle(ids, left, right, 9)
    assert kernels.merge_pair_np(ids, left, right, 9).tolist() == want
    assert kernels.merge_pair_nb(ids, left, right, 9).tolist() == want


@given(small_ids)
@settings(max_examples=200, deadline=None)
def test_pair_counts_are_non_overlapping(ids):
    keys, counts = kernels.pair_counts(ids, 8)
    got = dict(zip(keys.tolist(), counts.tolist()))
    want = {}
    for a in range(4):
        for b in range(4):
            n = (len(ids) - len(merge_oracle(ids, a, b, 9)))
            if n:
                want[a * 8 + b] = n
    assert got == want


@given(st.lists(st.integers(0, 3), min_size=0, max_size=80), st.integers(0, 10_000))
@settings(max_examples=150, deadline=None)
def test_encode_paths_agree(raw, seed):
    rng = np.random.default_rng(seed)
    # random merge table over a 4-letter alphabet
    vocab = 4
    merges = []
    for _ in range(int(rng.integers(0, 6))):
        merges.append((int(rng.integers(vocab)), int(rng.integers(vocab)), vocab))
        vocab += 1
    V = vocab
    ids = np.array(raw, dtype=np.int32)
    if merges:
        m = np.array(merges, dtype=np.int64)
        keys = m[:, 0] * V + m[:, 1]
        order = np.argsort(keys, kind="stable")
        # duplicate pairs cannot occur in a real merge table; keep the first
        keys_s, first = np.unique(keys[order], return_index=True)
        order = order[first]
        tables = (keys_s, order.astype(np.int64), m[order, 2].astype(np.int32))
    else:
        tables = (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.int32))
    a = kernels.encode_np(ids, *tables, V)
    b = kernels.encode_nb(ids, *tables, V)
    assert a.tolist() == b.tolist()


@given(st.integers(1, 60), st.integers(1, 6), st.integers(1, 8), st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_kmeans_assign_paths_agree(n, k, dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, dim))
    c = rng.normal(size=(k, dim))
    la, da = kernels.kmeans_assign_np(x, c)
    lb, db = kernels.kmeans_assign_nb(x, c)
    assert np.array_equal(la, lb)
    assert np.array_equal(da, db)
    brute = ((x[:, None, :] - c[None]) ** 2).sum(-1)
    np.testing.assert_allclose(da, brute.min(axis=1), rtol=1e-12, atol=1e-12)


def test_kmeans_assign_ties_go_to_lowest_center():
    x = np.zeros((1, 2))
    c = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    for impl in (kernels.kmeans_assign_np, kernels.kmeans_assign_nb):
        labels, _ = impl(x, c)
        assert labels.tolist() == [0]


@given(st.integers(1, 30), st.floats(0.0, 1.0), st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_greedy_keep_paths_agree(n, tau, seed):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=(n, 3))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    sim = e @ e.T
    a = kernels.greedy_keep_np(sim, tau)
    b = kernels.greedy_keep_nb(sim, tau)
    assert a.tolist() == b.tolist()
    assert a[0]
