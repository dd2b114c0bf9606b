from .cluster import kmeans, prototype_prune, semdedup
from .documents import Document, dedup_exact, doc_id, read_jsonl, write_jsonl
from .embed import EMBED_DIM, embed_doc, embed_docs
from .ngrams import BenchmarkRegistry, decontaminate, normalize_words, word_ngrams
from .pipeline import AcceptAll, CurationConfig, DocumentFilter, curate
from .shards import Shard, list_shards, read_shard, write_shard, write_shards

__all__ = [
    "AcceptAll",
    "BenchmarkRegistry",
    "CurationConfig",
    "Document",
    "DocumentFilter",
    "EMBED_DIM",
    "Shard",
    "curate",
    "decontaminate",
    "dedup_exact",
    "doc_id",
    "embed_doc",
    "embed_docs",
    "kmeans",
    "list_shards",
    "normalize_words",
    "prototype_prune",
    "read_jsonl",
    "read_shard",
    "semdedup",
    "word_ngrams",
    "write_jsonl",
    "write_shard",
    "write_shards",
]
