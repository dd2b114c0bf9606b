"""Hot inner loops: BPE merging, k-means assignment, greedy near-duplicate scan.

Each kernel has a numba implementation (``*_nb``) and a numpy twin (``*_np``).
The public name dispatches on :data:`lokiforge._accel.USE_NUMBA`. Both paths
return identical results; ``tests/test_kernels.py`` holds them to that.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# BPE
# ---------------------------------------------------------------------------


def merge_pair_np(ids, left, right, new):
    """Replace non-overlapping ``(left, right)`` occurrences, scanning left to right."""
    ids = np.asarray(ids, dtype=np.int32)
    if ids.size < 2:
        return ids.copy()
    hit = (ids[:-1] == left) & (ids[1:] == right)
    if not hit.any():
        return ids.copy()
    if left == right:
        # runs of consecutive hits overlap; keep every other one starting at the run head
        idx = np.flatnonzero(hit)
        starts = np.ones(idx.size, dtype=bool)
        starts[1:] = idx[1:] != idx[:-1] + 1
        run_head = np.maximum.accumulate(np.where(starts, idx, 0))
        idx = idx[(idx - run_head) % 2 == 0]
    else:
        idx = np.flatnonzero(hit)
    out = ids.copy()
    out[idx] = new
    keep = np.ones(ids.size, dtype=bool)
    keep[idx + 1] = False
    return out[keep]


@njit
def merge_pair_nb(ids, left, right, new):
    n = ids.shape[0]
    out = np.empty(n, dtype=np.int32)
    i = 0
    j = 0
    while i < n:
        if i + 1 < n and ids[i] == left and ids[i + 1] == right:
            out[j] = new
            i += 2
        else:
            out[j] = ids[i]
            i += 1
        j += 1
    return out[:j].copy()


def encode_np(ids, pair_keys, pair_ranks, pair_new, vocab_size):
    """Apply merges lowest rank first until none applies.

    ``pair_keys`` is sorted ``left * vocab_size + right``; ``pair_ranks`` and
    ``pair_new`` are aligned with it.
    """
    ids = np.asarray(ids, dtype=np.int32)
    if pair_keys.size == 0:
        return ids.copy()
    while ids.size >= 2:
        q = ids[:-1].astype(np.int64) * vocab_size + ids[1:]
        pos = np.searchsorted(pair_keys, q)
        pos[pos >= pair_keys.size] = 0
        found = pair_keys[pos] == q
        if not found.any():
            break
        ranks = np.where(found, pair_ranks[pos], np.iinfo(np.int64).max)
        best = int(np.argmin(ranks))
        k = pos[best]
        ids = merge_pair_np(ids, ids[best], ids[best + 1], pair_new[k])
    return ids


@njit
def encode_nb(ids, pair_keys, pair_ranks, pair_new, vocab_size):
    buf = ids.astype(np.int32).copy()
    n = buf.shape[0]
    m = pair_keys.shape[0]
    if m == 0:
        return buf
    big = np.iinfo(np.int64).max
    while n >= 2:
        best_rank = big
        best_k = -1
        for i in range(n - 1):
            q = np.int64(buf[i]) * vocab_size + buf[i + 1]
            p = np.searchsorted(pair_keys, q)
            if p < m and pair_keys[p] == q and pair_ranks[p] < best_rank:
                best_rank = pair_ranks[p]
                best_k = p
        if best_k < 0:
            break
        left = np.int32(pair_keys[best_k] // vocab_size)
        right = np.int32(pair_keys[best_k] % vocab_size)
        new = pair_new[best_k]
        i = 0
        j = 0
        while i < n:
            if i + 1 < n and buf[i] == left and buf[i + 1] == right:
                buf[j] = new
                i += 2
            else:
                buf[j] = buf[i]
                i += 1
            j += 1
        n = j
    return buf[:n].copy()


def pair_counts(ids, vocab_size):
    """Non-overlapping adjacent-pair counts as ``(keys, counts)``; negative ids are separators."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size < 2:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    a, b = ids[:-1], ids[1:]
    valid = (a >= 0) & (b >= 0)
    keys = a[valid] * vocab_size + b[valid]
    uniq, counts = np.unique(keys, return_counts=True)
    # runs like x x x overlap; a run of L equal tokens yields only L // 2 merges
    same = valid & (a == b)
    if same.any():
        idx = np.flatnonzero(same)
        starts = np.ones(idx.size, dtype=bool)
        starts[1:] = idx[1:] != idx[:-1] + 1
        run_id = np.cumsum(starts) - 1
        run_pairs = np.bincount(run_id)
        run_tok = a[idx[starts]]
        excess = run_pairs - (run_pairs + 1) // 2
        for tok, ex in zip(run_tok[excess > 0], excess[excess > 0]):
            key = tok * vocab_size + tok
            counts[np.searchsorted(uniq, key)] -= ex
    return uniq, counts


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


def kmeans_assign_np(x, centers):
    """Nearest center per row (ties: lowest center index) and squared distance.

    Accumulates over dimensions in order, like the numba kernel, so both paths
    agree bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    d = np.zeros((x.shape[0], centers.shape[0]))
    for j in range(x.shape[1]):
        t = x[:, j, None] - centers[None, :, j]
        d += t * t
    labels = np.argmin(d, axis=1)
    return labels.astype(np.int64), d[np.arange(x.shape[0]), labels]


@njit
def kmeans_assign_nb(x, centers):
    n, dim = x.shape
    k = centers.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        arg = 0
        for c in range(k):
            s = 0.0
            for j in range(dim):
                t = x[i, j] - centers[c, j]
                s += t * t
            if s < best:
                best = s
                arg = c
        labels[i] = arg
        dist[i] = best
    return labels, dist


def greedy_keep_np(sim, tau):
    """Walk rows in order; keep a row unless it reaches ``tau`` against an already kept row."""
    n = sim.shape[0]
    keep = np.zeros(n, dtype=bool)
    for i in range(n):
        if not keep.any() or sim[i, keep].max() < tau:
            keep[i] = True
    return keep


@njit
def greedy_keep_nb(sim, tau):
    n = sim.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        ok = True
        for j in range(i):
            if keep[j] and sim[i, j] >= tau:
                ok = False
                break
        keep[i] = ok
    return keep


if USE_NUMBA:
    merge_pair = merge_pair_nb
    encode = encode_nb
    kmeans_assign = kmeans_assign_nb
    greedy_keep = greedy_keep_nb
else:
    merge_pair = merge_pair_np
    encode = encode_np
    kmeans_assign = kmeans_assign_np
    greedy_keep = greedy_keep_np
