"""Byte-level BPE: training, encoding, utility-driven vocabulary pruning.

Token ids ``0..255`` are the single bytes. Every merge ``(left, right) -> new``
adds one token. Encoding applies merges lowest rank first, which reproduces the
segmentation the training loop itself produced.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EmptyCorpus, InvalidTarget, UnknownTokenId

FORMAT_VERSION = 1
N_BYTES = 256


@dataclass
class Tokenizer:
    vocab: list  # id -> bytes
    merges: list = field(default_factory=list)  # ordered (left, right, new)

    def __post_init__(self):
        self.vocab = [bytes(v) for v in self.vocab]
        self.merges = [tuple(int(x) for x in m) for m in self.merges]
        for b in range(N_BYTES):
            if self.vocab[b] != bytes([b]):
                raise ValueError(f"id {b} must be the single byte {b:#04x}")
        for left, right, new in self.merges:
            if self.vocab[new] != self.vocab[left] + self.vocab[right]:
                raise ValueError(f"merge ({left}, {right}) -> {new} does not concatenate")
        self._build_tables()

    def _build_tables(self):
        v = len(self.vocab)
        if self.merges:
            m = np.array(self.merges, dtype=np.int64)
            keys = m[:, 0] * v + m[:, 1]
            order = np.argsort(keys, kind="stable")
            self._keys = keys[order]
            self._ranks = order.astype(np.int64)
            self._new = m[order, 2].astype(np.int32)
        else:
            self._keys = np.zeros(0, np.int64)
            self._ranks = np.zeros(0, np.int64)
            self._new = np.zeros(0, np.int32)

    @property
    def vocab_size(self):
        return len(self.vocab)

    def __len__(self):
        return len(self.vocab)

    @classmethod
    def bytes_only(cls):
        return cls([bytes([b]) for b in range(N_BYTES)])

    def encode_array(self, data):
        if isinstance(data, str):
            data = data.encode("utf-8")
        ids = np.frombuffer(bytes(data), dtype=np.uint8).astype(np.int32)
        if ids.size < 2:
            return ids
        return kernels.encode(ids, self._keys, self._ranks, self._new, len(self.vocab))

    def encode(self, data):
        return self.encode_array(data).tolist()

    def decode(self, ids):
        n = len(self.vocab)
        out = []
        for i in ids:
            i = int(i)
            if not 0 <= i < n:
                raise UnknownTokenId(f"token id {i} outside [0, {n})")
            out.append(self.vocab[i])
        return b"".join(out)

    def to_json(self):
        return {
            "version": FORMAT_VERSION,
            "vocab": {str(i): tok.hex() for i, tok in enumerate(self.vocab)},
            "merges": [list(m) for m in self.merges],
        }

    @classmethod
    def from_json(cls, data):
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported tokenizer version {data.get('version')!r}")
        vocab = [bytes.fromhex(data["vocab"][str(i)]) for i in range(len(data["vocab"]))]
        return cls(vocab, [tuple(m) for m in data["merges"]])

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(json.load(f))


def _corpus_array(corpus):
    """Concatenate byte strings into one id array with ``-1`` between documents."""
    parts = []
    for doc in corpus:
        if isinstance(doc, str):
            doc = doc.encode("utf-8")
        if not doc:
            continue
        parts.append(np.frombuffer(bytes(doc), dtype=np.uint8).astype(np.int32))
        parts.append(np.array([-1], dtype=np.int32))
    if not parts:
        return np.zeros(0, dtype=np.int32)
    return np.concatenate(parts)


def train_bpe(corpus, target_size, min_frequency=2):
    """Learn merges until the vocabulary has ``target_size`` tokens.

    The most frequent adjacent pair wins each round; ties go to the
    lexicographically smallest ``(left, right)`` id pair. Pairs are counted
    non-overlapping. Training stops early once no pair occurs ``min_frequency``
    times.
    """
    if target_size <= N_BYTES:
        raise InvalidTarget(f"target_size must exceed {N_BYTES}, got {target_size}")
    ids = _corpus_array(corpus)
    if ids.size == 0:
        raise EmptyCorpus("cannot train on an empty corpus")
    vocab = [bytes([b]) for b in range(N_BYTES)]
    merges = []
    key_base = target_size
    while len(vocab) < target_size:
        keys, counts = kernels.pair_counts(ids, key_base)
        if counts.size == 0:
            break
        best = int(np.argmax(counts))
        if counts[best] < min_frequency:
            break
        left, right = divmod(int(keys[best]), key_base)
        new = len(vocab)
        vocab.append(vocab[left] + vocab[right])
        merges.append((left, right, new))
        ids = kernels.merge_pair(ids, left, right, new)
    return Tokenizer(vocab, merges)


def encoded_length(tok, corpus):
    return sum(int(tok.encode_array(doc).size) for doc in corpus)


def token_frequencies(tok, corpus):
    counts = np.zeros(len(tok.vocab), dtype=np.int64)
    for doc in corpus:
        ids = tok.encode_array(doc)
        if ids.size:
            counts += np.bincount(ids, minlength=len(tok.vocab))
    return counts


def _subset(tok, keep_ids):
    """Tokenizer restricted to ``keep_ids`` (sorted, includes all bytes), ids renumbered densely."""
    remap = {old: new for new, old in enumerate(keep_ids)}
    vocab = [tok.vocab[i] for i in keep_ids]
    merges = [
        (remap[l], remap[r], remap[n])
        for l, r, n in tok.merges
        if n in remap and l in remap and r in remap
    ]
    return Tokenizer(vocab, merges)


def without_tokens(tok, drop):
    """Remove merge tokens ``drop`` (and any merge built on them); ids are renumbered."""
    drop = {int(i) for i in drop}
    if any(i < N_BYTES for i in drop):
        raise InvalidTarget("byte tokens cannot be removed")
    dead = set(drop)
    for l, r, n in tok.merges:
        if l in dead or r in dead:
            dead.add(n)
    return _subset(tok, [i for i in range(len(tok.vocab)) if i not in dead])


def utility_scores(tok, corpus, ids=None):
    """Per-token score ``frequency * tokens saved per occurrence``.

    Tokens saved is the length of the token's bytes encoded without the token,
    minus one. Only ``ids`` (default: every merge token) are scored; the rest
    stay ``inf``.
    """
    freq = token_frequencies(tok, corpus)
    scores = np.full(len(tok.vocab), np.inf)
    if ids is None:
        ids = [n for _, _, n in tok.merges]
    for i in ids:
        without = _subset(tok, [j for j in range(len(tok.vocab)) if j != i])
        saved = int(without.encode_array(tok.vocab[i]).size) - 1
        scores[i] = float(freq[i]) * saved
    return scores


def prunable_ids(tok):
    """Merge tokens that no surviving merge builds on."""
    used = set()
    for l, r, _ in tok.merges:
        used.add(l)
        used.add(r)
    return [n for _, _, n in tok.merges if n not in used]


def prune_vocab(tok, corpus, target_size, round_fraction=0.1):
    """Shrink ``tok`` to ``target_size`` tokens by repeatedly dropping low-utility leaves.

    Each round scores the prunable tokens (merge results no other merge uses),
    removes at most ``round_fraction`` of them (at least one) with the lowest
    utility, then rescores. Ties drop the later-learned token first.
    """
    if not N_BYTES < target_size <= len(tok.vocab):
        raise InvalidTarget(f"target_size must lie in ({N_BYTES}, {len(tok.vocab)}], got {target_size}")
    corpus = [d.encode("utf-8") if isinstance(d, str) else bytes(d) for d in corpus]
    while len(tok.vocab) > target_size:
        candidates = prunable_ids(tok)
        if not candidates:
            raise InvalidTarget("no prunable tokens left")
        scores = utility_scores(tok, corpus, candidates)
        ranked = sorted(candidates, key=lambda i: (scores[i], -i))
        quota = max(1, int(math.floor(round_fraction * len(candidates))))
        quota = min(quota, len(tok.vocab) - target_size)
        drop = set(ranked[:quota])
        tok = _subset(tok, [i for i in range(len(tok.vocab)) if i not in drop])
    return tok
