"""Bundled synthetic data: a low-entropy templated corpus, benchmark passages
that share no vocabulary with it, and multiple-choice tasks over its facts."""

import numpy as np

from .datapipe.documents import Document

ADJECTIVES = ["red", "small", "quick", "lazy", "happy", "old", "green", "brave", "quiet", "bright"]
ANIMALS = ["fox", "dog", "cat", "bird", "horse", "mouse", "owl", "frog", "bear", "wolf"]
VERBS = ["sees", "chases", "likes", "finds", "follows", "watches", "helps", "meets"]
OBJECTS = ["ball", "tree", "river", "house", "stone", "garden", "hill", "box"]
NAMES = ["anna", "ben", "cara", "dan", "eva", "finn", "gina", "hugo", "ida", "jon"]
ACTIVITIES = ["read", "swim", "sing", "paint", "run", "cook", "dance", "write"]
PLACES = ["park", "school", "forest", "market", "library", "kitchen", "field", "city"]
CAPITALS = {
    "france": "paris",
    "spain": "madrid",
    "italy": "rome",
    "germany": "berlin",
    "egypt": "cairo",
    "japan": "tokyo",
    "peru": "lima",
    "kenya": "nairobi",
    "norway": "oslo",
    "chile": "santiago",
    "greece": "athens",
    "cuba": "havana",
}
NUMBER_WORDS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
                "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen"]


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def sentence(rng):
    kind = int(rng.integers(4))
    if kind == 0:
        return (f"the {_pick(rng, ADJECTIVES)} {_pick(rng, ANIMALS)} {_pick(rng, VERBS)} "
                f"the {_pick(rng, ADJECTIVES)} {_pick(rng, OBJECTS)}.")
    if kind == 1:
        return f"{_pick(rng, NAMES)} likes to {_pick(rng, ACTIVITIES)} in the {_pick(rng, PLACES)}."
    if kind == 2:
        country = _pick(rng, sorted(CAPITALS))
        return f"the capital of {country} is {CAPITALS[country]}."
    a, b = int(rng.integers(10)), int(rng.integers(9))
    return f"{NUMBER_WORDS[a]} plus {NUMBER_WORDS[b]} is {NUMBER_WORDS[a + b]}."


def make_document(rng, min_sentences=4, max_sentences=12):
    n = int(rng.integers(min_sentences, max_sentences + 1))
    return " ".join(sentence(rng) for _ in range(n))


def make_corpus(n_docs, seed=0, source_tag="synthetic"):
    rng = np.random.default_rng(seed)
    return [Document.from_text(make_document(rng), source_tag) for _ in range(n_docs)]


# benchmark passages use nonce words so they never collide with corpus n-grams
_SYLLABLES = ["zor", "quel", "vin", "trax", "plo", "mek", "sul", "dra", "kef", "yun", "wob", "jix"]


def nonce_word(rng):
    return "".join(_pick(rng, _SYLLABLES) for _ in range(int(rng.integers(2, 4))))


def make_benchmark_passages(n, seed=0, words=(12, 20)):
    rng = np.random.default_rng(seed + 7919)
    out = []
    for _ in range(n):
        k = int(rng.integers(words[0], words[1] + 1))
        out.append(" ".join(nonce_word(rng) for _ in range(k)) + ".")
    return out


def plant(doc_text, passage, rng):
    """Insert ``passage`` between two sentences of ``doc_text``."""
    parts = doc_text.split(". ")
    at = int(rng.integers(len(parts) + 1))
    parts.insert(at, passage.rstrip("."))
    return ". ".join(parts)


def make_capital_task(n_items=None, seed=0, shots=2):
    """Four-way capital-city questions. Dev exemplars use countries disjoint from the items."""
    from .evalharness.tasks import MCItem, MCTask

    rng = np.random.default_rng(seed)
    countries = sorted(CAPITALS)
    order = [countries[i] for i in rng.permutation(len(countries))]
    dev_c, item_c = order[:4], order[4:]
    cities = sorted(CAPITALS.values())

    def item(country):
        wrong = [c for c in cities if c != CAPITALS[country]]
        opts = [wrong[i] for i in rng.choice(len(wrong), 3, replace=False)]
        answer = int(rng.integers(4))
        opts.insert(answer, CAPITALS[country])
        return MCItem(f"what is the capital of {country}?", opts, answer)

    items = [item(c) for c in item_c]
    if n_items is not None:
        items = [items[i % len(items)] for i in range(n_items)]
    return MCTask("capitals", items, [item(c) for c in dev_c], shots)


def make_balanced_task(n_items, n_options=4, seed=0, shots=0, name="balanced"):
    """Items with nonce options whose correct index cycles through every slot equally."""
    from .evalharness.tasks import MCItem, MCTask

    rng = np.random.default_rng(seed)

    def item(i):
        opts = []
        while len(opts) < n_options:
            w = nonce_word(rng)
            if w not in opts:
                opts.append(w)
        return MCItem(f"question {i}: {nonce_word(rng)}?", opts, i % n_options)

    items = [item(i) for i in range(n_items)]
    dev = [item(n_items + i) for i in range(max(shots, 4))]
    return MCTask(name, items, dev, shots)


def make_arithmetic_items(n_items, seed=0):
    """``(question, numeric answer)`` pairs for exact-match generation scoring."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_items):
        a, b = int(rng.integers(10)), int(rng.integers(9))
        out.append((f"what is {a} plus {b}?", str(a + b)))
    return out
