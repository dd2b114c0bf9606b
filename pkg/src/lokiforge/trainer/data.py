"""Fixed-length training windows over concatenated shards, in seeded epoch order."""

import hashlib
import struct

import numpy as np

from ..datapipe.shards import list_shards, read_shard


def hash64(*values):
    """Deterministic 64-bit hash of unsigned integers."""
    blob = struct.pack(f"<{len(values)}Q", *[int(v) & 0xFFFFFFFFFFFFFFFF for v in values])
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


class TokenWindows:
    """Window ``i`` is ``stream[i*T : i*T + T + 1]``: T inputs and their T next-token targets."""

    def __init__(self, tokens, seq_len, vocab_size=None):
        self.stream = np.asarray(tokens, dtype=np.int64)
        self.seq_len = int(seq_len)
        self.vocab_size = vocab_size
        self.n = max(0, (self.stream.size - 1) // self.seq_len)
        if self.n == 0:
            raise ValueError(f"need more than {seq_len} tokens to form one window")
        self._perm_cache = {}

    @classmethod
    def from_shards(cls, path_or_paths, seq_len):
        paths = list_shards(path_or_paths) if isinstance(path_or_paths, str) else list(path_or_paths)
        if not paths:
            raise ValueError(f"no shards found at {path_or_paths!r}")
        shards = [read_shard(p) for p in paths]
        vocab = {s.vocab_size for s in shards}
        if len(vocab) != 1:
            raise ValueError(f"shards disagree on vocab size: {sorted(vocab)}")
        return cls(np.concatenate([s.tokens for s in shards]), seq_len, vocab.pop())

    def __len__(self):
        return self.n

    def window(self, i):
        start = int(i) * self.seq_len
        return self.stream[start : start + self.seq_len + 1]

    def windows(self, ids):
        return np.stack([self.window(i) for i in ids])

    def inputs(self):
        """All ``[n, T]`` input rows, in window order (what a teacher cache is built over)."""
        return np.stack([self.window(i)[:-1] for i in range(self.n)])

    def permutation(self, seed, epoch):
        key = (seed, epoch)
        perm = self._perm_cache.get(key)
        if perm is None:
            rng = np.random.default_rng(hash64(seed, epoch))
            perm = rng.permutation(self.n)
            if len(self._perm_cache) > 8:
                self._perm_cache.clear()
            self._perm_cache[key] = perm
        return perm

    def batch_ids(self, seed, start, count):
        """Window ids for global sequence positions ``start .. start + count``."""
        out = np.empty(count, dtype=np.int64)
        for j in range(count):
            g = start + j
            epoch, pos = divmod(g, self.n)
            out[j] = self.permutation(seed, epoch)[pos]
        return out
