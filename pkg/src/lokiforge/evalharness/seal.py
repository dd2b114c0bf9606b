"""Run an evaluation suite once per checkpoint and record it in a read-only manifest.

The guard is advisory: it is file based and keyed by the checkpoint's SHA-256.
"""

import datetime
import json
import os
import stat

from ..errors import SealedRunExists
from ..trainer.checkpoint import file_sha256, load_checkpoint
from .generate import GenTask, run_generation_eval
from .scoring import perplexity
from .tasks import run_mc_eval


def manifest_path(manifest_dir, ckpt_sha):
    return os.path.join(manifest_dir, f"{ckpt_sha}.json")


def _tainted_path(manifest_dir, ckpt_sha):
    k = 1
    while True:
        p = os.path.join(manifest_dir, f"{ckpt_sha}.tainted-{k}.json")
        if not os.path.exists(p):
            return p
        k += 1


def _write_readonly(path, obj):
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)
        f.flush()
        os.fsync(f.fileno())
    os.chmod(tmp, stat.S_IRUSR | stat.S_IRGRP | stat.S_IROTH)
    os.replace(tmp, path)


def seal_run(checkpoint, tasks, manifest_dir, tokenizer, model=None, seed=0, force=False,
             perplexity_tokens=None, normalize="mean"):
    """Evaluate ``checkpoint`` on every task exactly once and write its manifest.

    A second call for the same checkpoint raises :class:`SealedRunExists`
    unless ``force`` is set, in which case a separate manifest marked
    ``tainted`` is written next to the sealed one.
    """
    os.makedirs(manifest_dir, exist_ok=True)
    sha = file_sha256(checkpoint)
    sealed = manifest_path(manifest_dir, sha)
    tainted = False
    if os.path.exists(sealed):
        if not force:
            raise SealedRunExists(
                f"checkpoint {sha[:12]} was already evaluated; see {sealed}", manifest_path=sealed
            )
        tainted = True
    if model is None:
        from ..model import TransformerModel

        ck = load_checkpoint(checkpoint)
        model = TransformerModel(ck.model_config, params=ck.params)

    results, records = {}, {}
    for task in tasks:
        if isinstance(task, GenTask):
            acc, recs = run_generation_eval(model, tokenizer, task)
            results[task.name] = {"kind": "exact_match", "accuracy": acc, "n_items": len(recs)}
        else:
            acc, recs = run_mc_eval(model, tokenizer, task, seed=seed, normalize=normalize)
            results[task.name] = {
                "kind": "multiple_choice",
                "accuracy": acc,
                "n_items": len(recs),
                "shots": task.shots,
                "ties": sum(r["tie"] for r in recs),
            }
        records[task.name] = recs
    if perplexity_tokens is not None:
        results["perplexity"] = perplexity(model, perplexity_tokens)

    manifest = {
        "checkpoint_sha256": sha,
        "checkpoint": os.path.basename(str(checkpoint)),
        "tasks": [t.name for t in tasks],
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": seed,
        "normalize": normalize,
        "results": results,
        "sealed": True,
        "tainted": tainted,
    }
    path = _tainted_path(manifest_dir, sha) if tainted else sealed
    _write_readonly(path, manifest)
    report = path[: -len(".json")] + ".items.jsonl"
    with open(report, "w") as f:
        for name, recs in records.items():
            for r in recs:
                f.write(json.dumps({"task": name, **r}) + "\n")
    manifest["path"] = path
    return manifest
