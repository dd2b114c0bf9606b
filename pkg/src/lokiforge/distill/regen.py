import numpy as np

from ..errors import ReplacementExhausted


def regen_on_contamination(batch, registry, replacement_stream, tokenizer):
    """Swap every row whose decoded text hits the registry for the next clean replacement.

    ``replacement_stream`` yields ``(seq_id, tokens)`` pairs; contaminated
    replacements are skipped. Returns ``(clean_batch, regen_count, replaced)``
    where ``replaced`` maps row index to the seq id that took its place.
    """
    batch = np.array(batch, copy=True)
    replaced = {}
    stream = iter(replacement_stream)
    for row in range(batch.shape[0]):
        if not registry.contains(tokenizer.decode(batch[row])):
            continue
        while True:
            try:
                seq_id, cand = next(stream)
            except StopIteration:
                raise ReplacementExhausted(
                    f"replacement stream ran dry after {len(replaced)} regenerations"
                ) from None
            cand = np.asarray(cand)
            if cand.shape != batch[row].shape:
                raise ValueError(f"replacement shape {cand.shape} != row shape {batch[row].shape}")
            if not registry.contains(tokenizer.decode(cand)):
                batch[row] = cand
                replaced[row] = seq_id
                break
    return batch, len(replaced), replaced
