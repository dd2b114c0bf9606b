import math


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def batch_size_at(tokens_seen, b0, bmax, warmup_tokens):
    """Linear batch-size ramp from ``b0`` to ``bmax`` over the first ``warmup_tokens``."""
    if tokens_seen < 0:
        raise ValueError("tokens_seen must be >= 0")
    frac = 1.0 if warmup_tokens <= 0 else min(1.0, tokens_seen / warmup_tokens)
    return _round_half_up(b0 + (bmax - b0) * frac)


def lr_at(step, total_steps, peak, min_ratio=0.1, warmup_fraction=0.01):
    """Linear warmup then cosine decay to ``min_ratio * peak``; ``step`` is 1-based."""
    warm = max(1, _round_half_up(warmup_fraction * total_steps))
    if step <= warm:
        return peak * step / warm
    span = max(1, total_steps - warm)
    progress = min(1.0, (step - warm) / span)
    floor = peak * min_ratio
    return floor + 0.5 * (peak - floor) * (1.0 + math.cos(math.pi * progress))


def planned_steps(total_sequences, seq_len, b0, bmax, warmup_tokens, max_steps=0):
    """Steps needed to consume ``total_sequences`` under the batch ramp (capped by ``max_steps``)."""
    seen, steps = 0, 0
    while seen < total_sequences:
        if max_steps and steps >= max_steps:
            break
        b = batch_size_at(seen * seq_len, b0, bmax, warmup_tokens)
        seen += min(b, total_sequences - seen)
        steps += 1
    return steps
