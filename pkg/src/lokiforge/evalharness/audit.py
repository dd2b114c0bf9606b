"""Scan tokenized shards for benchmark n-grams."""

import os

from ..datapipe.ngrams import match_record
from ..datapipe.shards import list_shards, read_shard


def contamination_audit(shards, registry, tokenizer):
    """One match record per contaminated shard document; an empty list means clean.

    Uses the same n-gram matcher as curation, on the detokenized documents.
    """
    if isinstance(shards, (str, os.PathLike)):
        shards = list_shards(str(shards))
    matches = []
    if len(registry) == 0:
        return matches
    for path in shards:
        shard = read_shard(path)
        name = os.path.basename(shard.path)
        for i, toks in enumerate(shard.documents()):
            hits = registry.scan(tokenizer.decode(toks))
            if hits:
                rec = match_record(f"{name}:{i}", hits)
                rec["shard"] = name
                rec["document"] = i
                matches.append(rec)
    return matches
