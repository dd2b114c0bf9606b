"""Normalized word n-gram matching against benchmark text.

One implementation serves curation, KD-batch regeneration and the shard audit.
"""

from dataclasses import dataclass, field

DEFAULT_N = 8


def normalize_words(text):
    """Lowercase and split on runs of whitespace."""
    if isinstance(text, str):
        text = text.encode("utf-8")
    return bytes(text).lower().split()


def word_ngrams(text, n=DEFAULT_N):
    words = normalize_words(text)
    return [b" ".join(words[i : i + n]) for i in range(len(words) - n + 1)]


@dataclass
class BenchmarkRegistry:
    texts: list
    n: int = DEFAULT_N
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be >= 3")
        self.texts = [t.encode("utf-8") if isinstance(t, str) else bytes(t) for t in self.texts]
        self.index = self.build_index()

    def build_index(self):
        index = {}
        for bench_id, text in enumerate(self.texts):
            for gram in word_ngrams(text, self.n):
                index.setdefault(gram, bench_id)
        return index

    def __len__(self):
        return len(self.texts)

    def scan(self, text, first_only=False):
        """``(benchmark_id, ngram)`` for every registry n-gram found in ``text``."""
        if not self.index:
            return []
        hits = []
        for gram in word_ngrams(text, self.n):
            bench = self.index.get(gram)
            if bench is not None:
                hits.append((bench, gram))
                if first_only:
                    break
        return hits

    def contains(self, text):
        return bool(self.scan(text, first_only=True))

    @classmethod
    def load(cls, path, n=DEFAULT_N):
        """Plain-text file, passages separated by blank lines."""
        with open(path, "rb") as f:
            raw = f.read()
        passages, cur = [], []
        for line in raw.splitlines():
            if line.strip():
                cur.append(line)
            elif cur:
                passages.append(b"\n".join(cur))
                cur = []
        if cur:
            passages.append(b"\n".join(cur))
        return cls(passages, n=n)

    def save(self, path):
        with open(path, "wb") as f:
            f.write(b"\n\n".join(self.texts) + b"\n")


def match_record(doc_id, hits):
    bench, gram = hits[0]
    return {
        "doc_id": f"{doc_id:016x}" if isinstance(doc_id, int) else str(doc_id),
        "benchmark_id": int(bench),
        "ngram": gram.decode("utf-8", "replace"),
        "n_matches": len(hits),
    }


def decontaminate(docs, registry):
    """Drop every document sharing a normalized n-gram with the registry.

    Returns ``(kept, report)``; the report has one record per removed document.
    """
    kept, report = [], []
    for d in docs:
        hits = registry.scan(d.text)
        if hits:
            report.append(match_record(d.id, hits))
        else:
            kept.append(d)
    return kept, report
