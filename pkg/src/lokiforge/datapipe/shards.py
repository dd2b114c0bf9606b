"""``LKSH`` shard files.

Layout (little-endian)::

    magic "LKSH" | version u32 | vocab_size u32 | token_width u8 | doc_count u64
    payload: token ids, token_width bytes each
    offsets: (doc_count + 1) x u64, token index where each document starts
    sha256 of payload (32 bytes)

Every document is followed by the separator token, so document ``i`` spans
``offsets[i] : offsets[i + 1] - 1`` and the separator sits at ``offsets[i + 1] - 1``.
"""

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import ChecksumMismatch, IoFailure, TokenOutOfRange

MAGIC = b"LKSH"
VERSION = 1
HEADER = struct.Struct("<4sIIBQ")
DEFAULT_SEPARATOR = 0


def token_width_for(vocab_size):
    return 2 if vocab_size <= 1 << 16 else 4


@dataclass
class Shard:
    path: str
    vocab_size: int
    token_width: int
    tokens: np.ndarray
    offsets: np.ndarray

    @property
    def doc_count(self):
        return len(self.offsets) - 1

    def document(self, i):
        return self.tokens[self.offsets[i] : self.offsets[i + 1] - 1]

    def documents(self):
        for i in range(self.doc_count):
            yield self.document(i)


def write_shard(path, doc_token_lists, vocab_size, separator=DEFAULT_SEPARATOR):
    width = token_width_for(vocab_size)
    dtype = np.dtype("<u2" if width == 2 else "<u4")
    offsets = [0]
    parts = []
    for ids in doc_token_lists:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
            raise TokenOutOfRange(f"token id outside [0, {vocab_size}) in {path}")
        parts.append(ids)
        parts.append(np.array([separator], dtype=np.int64))
        offsets.append(offsets[-1] + ids.size + 1)
    tokens = np.concatenate(parts) if parts else np.zeros(0, np.int64)
    payload = tokens.astype(dtype).tobytes()
    blob = (
        HEADER.pack(MAGIC, VERSION, vocab_size, width, len(offsets) - 1)
        + payload
        + np.asarray(offsets, dtype="<u8").tobytes()
        + hashlib.sha256(payload).digest()
    )
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except OSError as e:
        raise IoFailure(f"cannot write shard {path}: {e}") from e
    return int(tokens.size)


def read_shard(path):
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read shard {path}: {e}") from e
    if len(blob) < HEADER.size + 8 + 32:
        raise ChecksumMismatch(f"{path}: truncated shard")
    magic, version, vocab_size, width, doc_count = HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION or width not in (2, 4):
        raise ChecksumMismatch(f"{path}: bad header")
    footer = (doc_count + 1) * 8 + 32
    payload = blob[HEADER.size : len(blob) - footer]
    if len(payload) % width:
        raise ChecksumMismatch(f"{path}: payload length not a multiple of the token width")
    digest = blob[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumMismatch(f"{path}: payload checksum mismatch")
    offsets = np.frombuffer(blob, dtype="<u8", count=doc_count + 1, offset=len(blob) - footer).astype(np.int64)
    tokens = np.frombuffer(payload, dtype="<u2" if width == 2 else "<u4").astype(np.int64)
    if offsets[0] != 0 or offsets[-1] != tokens.size or np.any(np.diff(offsets) <= 0):
        raise ChecksumMismatch(f"{path}: inconsistent offset table")
    if tokens.size and tokens.max() >= vocab_size:
        raise TokenOutOfRange(f"{path}: token id >= vocab_size {vocab_size}")
    return Shard(str(path), int(vocab_size), int(width), tokens, offsets)


def write_shards(docs, tokenizer, shard_token_budget, out_dir, prefix="shard", separator=DEFAULT_SEPARATOR):
    """Tokenize ``docs`` into shards of roughly ``shard_token_budget`` tokens.

    Shards close at the first document boundary at or past the budget, so no
    document straddles two files. Returns ``(paths, stats)``.
    """
    if shard_token_budget < 1:
        raise ValueError("shard_token_budget must be positive")
    os.makedirs(out_dir, exist_ok=True)
    paths, pending, pending_tokens = [], [], 0
    doc_tokens = 0
    total = 0

    def flush():
        nonlocal pending, pending_tokens, total
        path = os.path.join(out_dir, f"{prefix}_{len(paths):05d}.lksh")
        total += write_shard(path, pending, tokenizer.vocab_size, separator)
        paths.append(path)
        pending, pending_tokens = [], 0

    for d in docs:
        ids = tokenizer.encode_array(d.text)
        pending.append(ids)
        pending_tokens += ids.size + 1
        doc_tokens += ids.size
        if pending_tokens >= shard_token_budget:
            flush()
    if pending:
        flush()
    stats = {
        "shards": len(paths),
        "documents": len(docs),
        "document_tokens": int(doc_tokens),
        "separator_tokens": len(docs),
        "total_tokens": int(total),
    }
    return paths, stats


def list_shards(path):
    """Shard paths under a directory (sorted) or the single given file."""
    if os.path.isdir(path):
        return sorted(os.path.join(path, f) for f in os.listdir(path) if f.endswith(".lksh"))
    return [str(path)]
