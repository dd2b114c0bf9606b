"""k-means, semantic deduplication and prototype pruning over document embeddings."""

import math

import numpy as np

from .. import kernels
from .embed import embed_docs, embed_doc

KMEANS_ITERS = 20
_TIE_EPS = 1e-9


def farthest_point_init(x, k, seed):
    rng = np.random.default_rng(seed)
    first = int(rng.integers(x.shape[0]))
    chosen = [first]
    mind = ((x - x[first]) ** 2).sum(axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[chosen].copy()


def kmeans(x, k, seed, iters=KMEANS_ITERS):
    """Lloyd's algorithm for a fixed number of iterations.

    Returns ``(labels, centers)``. Empty clusters are re-seeded with the point
    farthest from its current center.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        return np.zeros(0, np.int64), np.zeros((0, x.shape[1]))
    k = max(1, min(int(k), n))
    centers = farthest_point_init(x, k, seed)
    for _ in range(iters):
        labels, dist = kernels.kmeans_assign(x, centers)
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, x)
        for c in np.flatnonzero(counts == 0):
            far = int(np.argmax(dist))
            sums[c] = x[far]
            counts[c] = 1
            dist[far] = -1.0
        centers = sums / counts[:, None]
    labels, _ = kernels.kmeans_assign(x, centers)
    return labels, centers


def _cos_to_center(x, centers, labels):
    c = centers[labels]
    norms = np.linalg.norm(c, axis=1)
    norms[norms == 0] = 1.0
    return (x * c).sum(axis=1) / norms


def semdedup(docs, k_clusters, tau, seed, embedder=embed_doc):
    """Remove near-duplicates inside each k-means cluster.

    Members are visited farthest-from-centroid first (ties: lower id, then
    input order); a member is dropped when its cosine to an already kept member
    reaches ``tau``. Returns ``(kept, report)`` with kept docs in input order.
    """
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    if k_clusters < 1:
        raise ValueError("k_clusters must be >= 1")
    n = len(docs)
    if n == 0:
        return [], {"removed": [], "flagged_empty": 0, "n_in": 0, "n_kept": 0}
    x = embed_docs(docs, embedder)
    live = np.flatnonzero(np.linalg.norm(x, axis=1) > 0)
    keep = np.ones(n, dtype=bool)
    removed = []
    if live.size:
        xl = x[live]
        labels, centers = kmeans(xl, k_clusters, seed)
        closeness = _cos_to_center(xl, centers, labels)
        for c in range(centers.shape[0]):
            members = np.flatnonzero(labels == c)
            if members.size < 2:
                continue
            order = sorted(members, key=lambda m: (closeness[m], docs[live[m]].id, live[m]))
            order = np.array(order)
            emb = xl[order]
            sim = emb @ emb.T
            kept_mask = kernels.greedy_keep(sim, tau - _TIE_EPS)
            kept_pos = np.flatnonzero(kept_mask)
            for pos in np.flatnonzero(~kept_mask):
                j = kept_pos[np.argmax(sim[pos, kept_pos])]
                src = live[order[pos]]
                keep[src] = False
                removed.append(
                    {
                        "doc_id": f"{docs[src].id:016x}",
                        "duplicate_of": f"{docs[live[order[j]]].id:016x}",
                        "cluster": int(c),
                        "cosine": float(sim[pos, j]),
                    }
                )
    kept = [d for d, k in zip(docs, keep) if k]
    report = {
        "removed": removed,
        "flagged_empty": int(n - live.size),
        "n_in": n,
        "n_kept": len(kept),
    }
    return kept, report


def n_to_keep(n, prune_fraction):
    return int(math.ceil(round((1.0 - prune_fraction) * n, 9)))


def prototype_prune(docs, k_clusters, prune_fraction, seed, embedder=embed_doc):
    """Drop the ``prune_fraction`` of docs most similar to their own centroid.

    Keeps ``ceil((1 - f) * n)`` documents, in input order. Empty documents score
    lowest and are never pruned.
    """
    if not 0 <= prune_fraction < 1:
        raise ValueError("prune_fraction must lie in [0, 1)")
    n = len(docs)
    n_remove = n - n_to_keep(n, prune_fraction)
    if n_remove <= 0:
        return list(docs)
    x = embed_docs(docs, embedder)
    score = np.full(n, -np.inf)
    live = np.flatnonzero(np.linalg.norm(x, axis=1) > 0)
    if live.size:
        labels, centers = kmeans(x[live], k_clusters, seed)
        score[live] = _cos_to_center(x[live], centers, labels)
    order = sorted(range(n), key=lambda i: (-score[i], docs[i].id, i))
    drop = set(order[:n_remove])
    return [d for i, d in enumerate(docs) if i not in drop]
