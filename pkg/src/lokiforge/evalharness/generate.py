"""Exact-match scoring of greedily generated numeric answers."""

import re
from dataclasses import dataclass

from ..model import greedy_decode

_NUMBER = re.compile(r"-?\d[\d,]*(?:\.\d+)?")


def extract_final_number(text):
    """Last number in ``text`` with thousands separators removed, or None."""
    found = _NUMBER.findall(text)
    if not found:
        return None
    num = found[-1].replace(",", "")
    if "." in num:
        num = num.rstrip("0").rstrip(".")
    return num


@dataclass
class GenTask:
    name: str
    items: list  # (question, answer) pairs
    max_new_tokens: int = 16


def run_generation_eval(model, tokenizer, task):
    """Fraction of items whose final generated number equals the reference."""
    records = []
    for i, (question, answer) in enumerate(task.items):
        prompt = tokenizer.encode(f"Q: {question}\nA:")
        budget = max(0, min(task.max_new_tokens, model.max_seq_len - len(prompt)))
        out = tokenizer.decode(greedy_decode(model, prompt, budget)).decode("utf-8", "replace")
        out = out.split("\n", 1)[0]
        got = extract_final_number(out)
        want = extract_final_number(str(answer))
        records.append({"index": i, "output": out, "extracted": got, "answer": want, "correct": got == want})
    acc = sum(r["correct"] for r in records) / len(records) if records else 0.0
    return acc, records
