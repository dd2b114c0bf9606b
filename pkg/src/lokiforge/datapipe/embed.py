import zlib

import numpy as np

from .ngrams import normalize_words

EMBED_DIM = 256


def embed_doc(text, dim=EMBED_DIM):
    """Hashed bag of word trigrams, L2-normalized.

    Documents with fewer than three words hash their whole word sequence as a
    single gram. Empty documents give the zero vector.
    """
    words = normalize_words(text)
    v = np.zeros(dim, dtype=np.float64)
    if not words:
        return v
    if len(words) < 3:
        grams = [b" ".join(words)]
    else:
        grams = [b" ".join(words[i : i + 3]) for i in range(len(words) - 2)]
    buckets = np.fromiter((zlib.crc32(g) % dim for g in grams), dtype=np.int64, count=len(grams))
    v += np.bincount(buckets, minlength=dim)
    return v / np.linalg.norm(v)


def embed_docs(docs, embedder=embed_doc):
    """Row-stacked embeddings; ``embedder`` maps document bytes to a vector."""
    if not docs:
        return np.zeros((0, EMBED_DIM))
    return np.stack([embedder(d.text) for d in docs])
