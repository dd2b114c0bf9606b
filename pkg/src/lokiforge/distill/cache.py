"""``LKTC`` teacher cache files.

Layout (little-endian)::

    magic "LKTC" | version u32 | vocab_size u32 | k u32 | seq_len u32 | n_sequences u64
    per (sequence id, position), sequence-major:
        k x u32 ids | k x f32 probs | f32 tail_mass
    sha256 of everything above (32 bytes)
"""

import hashlib
import os
import struct

import numpy as np

from ..errors import ChecksumMismatch, IoFailure, VocabMismatch
from .teachers import TeacherDistribution

MAGIC = b"LKTC"
VERSION = 1
HEADER = struct.Struct("<4sIIIIQ")


def record_dtype(k):
    return np.dtype([("ids", "<u4", (k,)), ("probs", "<f4", (k,)), ("tail", "<f4")])


def write_teacher_cache(path, teacher, sequences, batch_size=16):
    """Query ``teacher`` on every row of ``sequences`` [N, T] and dump the results.

    Row ``i`` is stored as sequence id ``i``.
    """
    sequences = np.asarray(sequences)
    n, seq_len = sequences.shape
    chunks = []
    k = None
    for start in range(0, n, batch_size):
        rows = sequences[start : start + batch_size]
        dist = teacher(rows, np.arange(start, start + len(rows)))
        k = dist.k
        rec = np.zeros(dist.shape, dtype=record_dtype(k))
        rec["ids"] = dist.ids
        rec["probs"] = dist.probs
        rec["tail"] = dist.tail_mass
        chunks.append(rec.tobytes())
    if k is None:
        k = getattr(teacher, "k", 1)
    body = HEADER.pack(MAGIC, VERSION, teacher.vocab_size, k, seq_len, n) + b"".join(chunks)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as f:
            f.write(body)
            f.write(hashlib.sha256(body).digest())
        os.replace(tmp, path)
    except OSError as e:
        raise IoFailure(f"cannot write teacher cache {path}: {e}") from e


class CachedTeacher:
    """Teacher backed by an ``LKTC`` file; lookups are by sequence id."""

    def __init__(self, path):
        try:
            with open(path, "rb") as f:
                blob = f.read()
        except OSError as e:
            raise IoFailure(f"cannot read teacher cache {path}: {e}") from e
        if len(blob) < HEADER.size + 32:
            raise ChecksumMismatch(f"{path}: truncated teacher cache")
        body, digest = blob[:-32], blob[-32:]
        if hashlib.sha256(body).digest() != digest:
            raise ChecksumMismatch(f"{path}: teacher cache checksum mismatch")
        magic, version, vocab_size, k, seq_len, n = HEADER.unpack_from(body)
        if magic != MAGIC or version != VERSION:
            raise ChecksumMismatch(f"{path}: bad teacher cache header")
        rec = np.frombuffer(body, dtype=record_dtype(k), offset=HEADER.size)
        if rec.size != n * seq_len:
            raise ChecksumMismatch(f"{path}: expected {n * seq_len} records, found {rec.size}")
        self.path = str(path)
        self.vocab_size = vocab_size
        self.k = k
        self.seq_len = seq_len
        self.records = rec.reshape(n, seq_len)

    def __len__(self):
        return self.records.shape[0]

    def __call__(self, tokens, seq_ids=None):
        tokens = np.asarray(tokens)
        if seq_ids is None:
            raise ValueError("a cached teacher needs sequence ids")
        seq_ids = np.asarray(seq_ids, dtype=np.int64)
        if tokens.shape[1] > self.seq_len:
            raise VocabMismatch(f"cache holds {self.seq_len} positions, asked for {tokens.shape[1]}")
        rec = self.records[seq_ids, : tokens.shape[1]]
        return TeacherDistribution(
            rec["ids"].astype(np.int64), rec["probs"].astype(np.float32), rec["tail"].astype(np.float32)
        )
