"""End-to-end curation: exact dedup, semdedup, prototype pruning, quality filter,
decontamination, sharding. Decontamination runs last so no later stage can
reintroduce benchmark text."""

import json
import os
from dataclasses import asdict, dataclass
from typing import Protocol

from .cluster import prototype_prune, semdedup
from .documents import dedup_exact
from .ngrams import decontaminate
from .shards import write_shards


class DocumentFilter(Protocol):
    def __call__(self, doc) -> bool: ...


class AcceptAll:
    """Stand-in for a learned quality classifier."""

    def __call__(self, doc):
        return True


@dataclass
class CurationConfig:
    k_clusters: int = 8
    dedup_tau: float = 0.95
    prune_k_clusters: int = 8
    prune_fraction: float = 0.05
    shard_token_budget: int = 1 << 20
    seed: int = 0


def curate(docs, tokenizer, registry, cfg, out_dir, doc_filter=None):
    """Run every stage and write shards plus reports under ``out_dir``.

    Returns a summary dict; ``contamination.jsonl`` and ``curation_report.json``
    hold the detail.
    """
    doc_filter = doc_filter or AcceptAll()
    counts = {"input": len(docs)}
    stage = dedup_exact(docs)
    counts["exact_dedup"] = len(stage)
    stage, dedup_report = semdedup(stage, cfg.k_clusters, cfg.dedup_tau, cfg.seed)
    counts["semdedup"] = len(stage)
    stage = prototype_prune(stage, cfg.prune_k_clusters, cfg.prune_fraction, cfg.seed)
    counts["prototype_prune"] = len(stage)
    stage = [d for d in stage if doc_filter(d)]
    counts["filter"] = len(stage)
    stage, contamination = decontaminate(stage, registry)
    counts["decontaminate"] = len(stage)

    os.makedirs(out_dir, exist_ok=True)
    paths, shard_stats = write_shards(stage, tokenizer, cfg.shard_token_budget, os.path.join(out_dir, "shards"))
    with open(os.path.join(out_dir, "contamination.jsonl"), "w") as f:
        for rec in contamination:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    summary = {
        "config": asdict(cfg),
        "stage_counts": counts,
        "semdedup_removed": dedup_report["removed"],
        "shards": [os.path.relpath(p, out_dir) for p in paths],
        "shard_stats": shard_stats,
        "contaminated_documents": len(contamination),
    }
    with open(os.path.join(out_dir, "curation_report.json"), "w") as f:
        json.dump(summary, f, indent=1, sort_keys=True)
    summary["kept"] = stage
    summary["shard_paths"] = paths
    return summary
