"""Multiple-choice tasks and few-shot accuracy."""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .._accel import worker_count
from ..errors import NotEnoughExemplars
from ..trainer.data import hash64
from .scoring import score_options

TEMPLATE = "Q: {context}\nA: {answer}\n\n"
QUERY = "Q: {context}\nA:"


@dataclass
class MCItem:
    context: str
    options: list
    answer: int

    def __post_init__(self):
        self.options = [str(o) for o in self.options]
        if len(self.options) < 2:
            raise ValueError("an item needs at least two options")
        if not 0 <= int(self.answer) < len(self.options):
            raise ValueError(f"answer {self.answer} out of range for {len(self.options)} options")
        self.answer = int(self.answer)

    def to_dict(self):
        return {"context": self.context, "options": list(self.options), "answer": self.answer}


@dataclass
class MCTask:
    name: str
    items: list
    dev_items: list = field(default_factory=list)
    shots: int = 0

    def __post_init__(self):
        self.items = [i if isinstance(i, MCItem) else MCItem(**i) for i in self.items]
        self.dev_items = [i if isinstance(i, MCItem) else MCItem(**i) for i in self.dev_items]
        overlap = {i.context for i in self.items} & {i.context for i in self.dev_items}
        if overlap:
            raise ValueError(f"dev split shares {len(overlap)} contexts with the test items")

    def to_json(self):
        return {
            "name": self.name,
            "shots": self.shots,
            "items": [i.to_dict() for i in self.items],
            "dev_items": [i.to_dict() for i in self.dev_items],
        }

    @classmethod
    def from_json(cls, data):
        return cls(data["name"], data["items"], data.get("dev_items", []), int(data.get("shots", 0)))

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(json.load(f))


def build_prompt(task, index, shots, seed):
    """Few-shot prefix plus the query for item ``index``.

    Exemplars are a seeded sample from the dev split that depends only on
    ``(seed, index)``, so results do not depend on evaluation order.
    """
    parts = []
    if shots:
        rng = np.random.default_rng(hash64(seed, index))
        for j in rng.choice(len(task.dev_items), shots, replace=False):
            ex = task.dev_items[int(j)]
            parts.append(TEMPLATE.format(context=ex.context, answer=ex.options[ex.answer]))
    parts.append(QUERY.format(context=task.items[index].context))
    return "".join(parts)


def predict(scores):
    """Argmax with ties going to the lowest index; also reports whether a tie occurred."""
    scores = np.asarray(scores)
    best = int(np.argmax(scores))
    tied = int(np.sum(scores == scores[best])) > 1
    return best, tied


def run_mc_eval(model, tokenizer, task, shots=None, seed=0, normalize="mean", workers=None):
    """Accuracy of ``model`` on ``task`` and one record per item (in item order)."""
    shots = task.shots if shots is None else int(shots)
    if shots < 0:
        raise ValueError("shots must be >= 0")
    if shots > len(task.dev_items):
        raise NotEnoughExemplars(f"{task.name}: {shots} shots requested, {len(task.dev_items)} dev items")
    if not task.items:
        raise ValueError(f"{task.name}: no items")

    def one(i):
        item = task.items[i]
        prompt = build_prompt(task, i, shots, seed)
        ptoks = tokenizer.encode(prompt)
        otoks = [tokenizer.encode(" " + o) for o in item.options]
        scores = score_options(model, ptoks, otoks, normalize)
        pred, tied = predict(scores)
        return {
            "index": i,
            "prediction": pred,
            "answer": item.answer,
            "correct": pred == item.answer,
            "tie": tied,
            "scores": scores,
        }

    n = workers or worker_count()
    if n > 1 and len(task.items) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            records = list(pool.map(one, range(len(task.items))))
    else:
        records = [one(i) for i in range(len(task.items))]
    acc = sum(r["correct"] for r in records) / len(records)
    return acc, records
