import hashlib
import json
from dataclasses import dataclass


def doc_id(text):
    """Stable 64-bit content hash."""
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class Document:
    id: int
    text: bytes
    source_tag: str = ""

    @classmethod
    def from_text(cls, text, source_tag=""):
        if isinstance(text, str):
            text = text.encode("utf-8")
        return cls(doc_id(text), bytes(text), source_tag)


def read_jsonl(path):
    """Documents from newline-delimited JSON ``{"id"?, "text", "source"}``.

    The id is always recomputed from the text; a supplied id is ignored.
    """
    docs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "text" not in rec:
                raise ValueError(f"{path}:{lineno}: record has no 'text'")
            docs.append(Document.from_text(rec["text"], rec.get("source", "")))
    return docs


def write_jsonl(docs, path):
    with open(path, "w", encoding="utf-8") as f:
        for d in docs:
            rec = {"id": f"{d.id:016x}", "text": d.text.decode("utf-8", "replace"), "source": d.source_tag}
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")


def dedup_exact(docs):
    """First occurrence of every content id, in input order."""
    seen = set()
    out = []
    for d in docs:
        if d.id not in seen:
            seen.add(d.id)
            out.append(d)
    return out
