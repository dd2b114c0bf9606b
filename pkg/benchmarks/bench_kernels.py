"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Both paths are checked for identical output before timing.
"""

import argparse
import time

import numpy as np

from lokiforge import kernels
from lokiforge._accel import HAVE_NUMBA
from lokiforge.synthetic import make_corpus
from lokiforge.tokenizer import _corpus_array, train_bpe


def best_of(fn, repeat):
    fn()  # warm up (and JIT compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    docs = [d.text for d in make_corpus(1500, seed=0)]
    tok = train_bpe(docs[:300], 512)
    ids = _corpus_array(docs)
    text = np.frombuffer(b" ".join(docs), dtype=np.uint8).astype(np.int32)
    left, right, new = tok.merges[0]
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20000, 64))
    c = rng.normal(size=(32, 64))
    e = rng.normal(size=(400, 64))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    sim = e @ e.T
    keys = (tok._keys, tok._ranks, tok._new, tok.vocab_size)
    return [
        ("merge_pair", lambda impl: impl(ids, left, right, new), kernels.merge_pair_np, kernels.merge_pair_nb),
        ("encode", lambda impl: impl(text, *keys), kernels.encode_np, kernels.encode_nb),
        ("kmeans_assign", lambda impl: impl(x, c), kernels.kmeans_assign_np, kernels.kmeans_assign_nb),
        ("greedy_keep", lambda impl: impl(sim, 0.2), kernels.greedy_keep_np, kernels.greedy_keep_nb),
    ]


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    print(f"{'kernel':<14} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")
    for name, call, np_impl, nb_impl in cases():
        if not _same(call(np_impl), call(nb_impl)):
            raise SystemExit(f"{name}: numba and numpy outputs differ")
        t_np = best_of(lambda: call(np_impl), args.repeat)
        t_nb = best_of(lambda: call(nb_impl), args.repeat)
        print(f"{name:<14} {t_np * 1e3:>10.2f} {t_nb * 1e3:>10.2f} {t_np / t_nb:>7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
