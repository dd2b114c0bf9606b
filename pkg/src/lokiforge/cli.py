"""``lokiforge`` command line: tok-train, tok-prune, curate, teacher-cache, train, eval, audit.

Exit codes: 0 success, 1 runtime error, 2 usage error, 3 rollback limit exceeded.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import runconfig
from .errors import LokiError, RollbackLimitExceeded, UsageError

log = logging.getLogger("lokiforge")

COMMANDS = ("tok-train", "tok-prune", "curate", "teacher-cache", "train", "eval", "audit")
HELP = {
    "tok-train": "train a byte-level BPE tokenizer (optionally pruned)",
    "tok-prune": "prune an existing tokenizer to tokenizer.prune_to tokens",
    "curate": "dedup, prune, decontaminate and shard a corpus",
    "teacher-cache": "precompute top-k teacher distributions over the training windows",
    "train": "train a model on curated shards",
    "eval": "sealed single-run evaluation of a checkpoint",
    "audit": "scan shards for benchmark n-grams",
}


@dataclass
class Command:
    subcommand: str
    config: str = None
    overrides: dict = field(default_factory=dict)
    out: str = None
    force: bool = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="lokiforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", help="JSON run config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a dotted config key (repeatable)")
        p.add_argument("--out", default=None, help="output directory (default: runs/<subcommand>)")
        if name == "eval":
            p.add_argument("--force", action="store_true",
                           help="re-run an already sealed checkpoint; the manifest is marked tainted")
        if name == "train":
            p.add_argument("--inject-spike", action="append", type=int, default=[], metavar="STEP",
                           help="drill: corrupt the batch at STEP to force a loss spike")
    return parser


def parse_args(argv):
    args = build_parser().parse_args(argv)
    if not args.subcommand:
        raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
    overrides = {}
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = runconfig.parse_value(raw)
    if getattr(args, "inject_spike", None):
        overrides["trainer.inject_spike_steps"] = list(args.inject_spike)
    # reject unknown keys at parse time, before any work starts
    probe = runconfig.resolve(None, None)
    for key, value in overrides.items():
        runconfig.set_dotted(probe, key, value)
    out = args.out or os.path.join("runs", args.subcommand)
    return Command(args.subcommand, args.config, overrides, out, bool(getattr(args, "force", False)))


# --------------------------------------------------------------------- inputs


def _corpus(cfg):
    from .datapipe import read_jsonl
    from .synthetic import make_corpus, plant

    sec = cfg["corpus"]
    if sec["path"]:
        docs = read_jsonl(sec["path"])
    else:
        docs = make_corpus(sec["synthetic_docs"], sec["synthetic_seed"])
    k = int(sec["plant_benchmarks"])
    if k:
        from .datapipe import Document

        rng = np.random.default_rng(sec["synthetic_seed"] + 1)
        passages = _registry(cfg).texts
        docs = list(docs)
        for i in range(min(k, len(docs))):
            text = plant(docs[i].text.decode("utf-8"), passages[i % len(passages)].decode("utf-8"), rng)
            docs[i] = Document.from_text(text, "planted")
    return docs


def _registry(cfg):
    from .datapipe import BenchmarkRegistry
    from .synthetic import make_benchmark_passages

    sec = cfg["benchmarks"]
    if sec["path"]:
        return BenchmarkRegistry.load(sec["path"], n=sec["n"])
    return BenchmarkRegistry(make_benchmark_passages(sec["synthetic_passages"]), n=sec["n"])


def _tokenizer(cfg, required=True):
    from .tokenizer import Tokenizer

    path = cfg["tokenizer"]["path"]
    if not path:
        if required:
            raise UsageError("tokenizer.path is required for this command")
        return None
    return Tokenizer.load(path)


def _shards(cfg, key="data"):
    path = cfg[key]["shards"] if key != "audit" else (cfg["audit"]["shards"] or cfg["data"]["shards"])
    if not path:
        raise UsageError(f"{key}.shards is required for this command")
    return path


# ------------------------------------------------------------------- commands


def cmd_tok_train(cfg, out, cmd):
    from .tokenizer import encoded_length, prune_vocab, train_bpe

    sec = cfg["tokenizer"]
    docs = _corpus(cfg)
    texts = [d.text for d in docs]
    train_texts = texts[: sec["train_docs"]] if sec["train_docs"] else texts
    tok = train_bpe(train_texts, sec["vocab_size"], sec["min_frequency"])
    if sec["prune_to"]:
        tok = prune_vocab(tok, train_texts, sec["prune_to"], sec["round_fraction"])
    path = os.path.join(out, "tokenizer.json")
    tok.save(path)
    return {"tokenizer": path, "vocab_size": tok.vocab_size, "merges": len(tok.merges),
            "corpus_bytes": sum(len(t) for t in texts), "encoded_tokens": encoded_length(tok, texts)}


def cmd_tok_prune(cfg, out, cmd):
    from .tokenizer import encoded_length, prune_vocab

    sec = cfg["tokenizer"]
    if not sec["prune_to"]:
        raise UsageError("tokenizer.prune_to must be set")
    tok = _tokenizer(cfg)
    texts = [d.text for d in _corpus(cfg)]
    before = encoded_length(tok, texts)
    pruned = prune_vocab(tok, texts, sec["prune_to"], sec["round_fraction"])
    path = os.path.join(out, "tokenizer.json")
    pruned.save(path)
    return {"tokenizer": path, "vocab_size": pruned.vocab_size, "encoded_tokens_before": before,
            "encoded_tokens_after": encoded_length(pruned, texts)}


def cmd_curate(cfg, out, cmd):
    from .datapipe import curate

    tok = _tokenizer(cfg)
    registry = _registry(cfg)
    registry.save(os.path.join(out, "benchmarks.txt"))
    summary = curate(_corpus(cfg), tok, registry, runconfig.curation_config(cfg), out)
    return {"stage_counts": summary["stage_counts"], "shards": os.path.join(out, "shards"),
            "contaminated_documents": summary["contaminated_documents"]}


def _load_model(path):
    from .model import TransformerModel
    from .trainer import load_checkpoint

    ck = load_checkpoint(path)
    return TransformerModel(ck.model_config, params=ck.params)


def cmd_teacher_cache(cfg, out, cmd):
    from .distill import ModelTeacher, write_teacher_cache
    from .trainer import TokenWindows

    sec = cfg["teachers"]
    if not sec["checkpoints"]:
        raise UsageError("teachers.checkpoints must list at least one checkpoint")
    windows = TokenWindows.from_shards(_shards(cfg), cfg["trainer"]["seq_len"])
    rows = windows.inputs()
    paths = []
    for i, ckpt in enumerate(sec["checkpoints"]):
        teacher = ModelTeacher(_load_model(ckpt), sec["top_k"], sec["temperature"], name=f"teacher{i}")
        path = os.path.join(out, f"teacher_{i}.lktc")
        write_teacher_cache(path, teacher, rows)
        paths.append(path)
    return {"caches": paths, "sequences": int(rows.shape[0])}


def cmd_train(cfg, out, cmd):
    from .distill import CachedTeacher, ModelTeacher
    from .trainer import TokenWindows, Trainer

    tcfg = runconfig.train_config(cfg)
    windows = TokenWindows.from_shards(_shards(cfg), tcfg.seq_len)
    mcfg = runconfig.model_config(cfg, windows.vocab_size)
    sec = cfg["teachers"]
    teachers = [CachedTeacher(p) for p in sec["caches"]]
    teachers += [ModelTeacher(_load_model(p), sec["top_k"], sec["temperature"]) for p in sec["checkpoints"]]
    registry = tok = None
    if teachers:
        registry = _registry(cfg)
        tok = _tokenizer(cfg)
    kw = dict(teachers=teachers, registry=registry, tokenizer=tok)
    if cfg["data"]["resume"]:
        trainer = Trainer.resume(cfg["data"]["resume"], mcfg, tcfg, windows, out, **kw)
    else:
        trainer = Trainer(mcfg, tcfg, windows, out, **kw)
    with trainer:
        summary = trainer.run()
    return summary


def _eval_tasks(cfg):
    from .evalharness import GenTask, MCTask
    from .synthetic import make_arithmetic_items, make_balanced_task, make_capital_task

    sec = cfg["eval"]
    tasks = [MCTask.load(p) for p in sec["tasks"]]
    if sec["synthetic_tasks"]:
        tasks.append(make_capital_task(seed=sec["seed"], shots=2))
        tasks.append(make_balanced_task(sec["items"], seed=sec["seed"]))
        tasks.append(GenTask("arithmetic", make_arithmetic_items(sec["items"], sec["seed"]), max_new_tokens=8))
    if sec["shots"] is not None:
        for t in tasks:
            if isinstance(t, MCTask):
                t.shots = int(sec["shots"])
    return tasks


def cmd_eval(cfg, out, cmd):
    from .datapipe import list_shards, read_shard
    from .evalharness import seal_run

    sec = cfg["eval"]
    if not sec["checkpoint"]:
        raise UsageError("eval.checkpoint is required")
    tok = _tokenizer(cfg)
    ppl = None
    if sec["perplexity"] and cfg["data"]["shards"]:
        ppl = np.concatenate([read_shard(p).tokens for p in list_shards(cfg["data"]["shards"])])
    manifest = seal_run(sec["checkpoint"], _eval_tasks(cfg), os.path.join(out, "manifests"), tok,
                        seed=sec["seed"], force=cmd.force, perplexity_tokens=ppl, normalize=sec["normalize"])
    return {"manifest": manifest["path"], "results": manifest["results"], "tainted": manifest["tainted"]}


class AuditFailed(LokiError):
    pass


def cmd_audit(cfg, out, cmd):
    from .evalharness import contamination_audit

    matches = contamination_audit(_shards(cfg, "audit"), _registry(cfg), _tokenizer(cfg))
    path = os.path.join(out, "audit.jsonl")
    with open(path, "w") as f:
        for m in matches:
            f.write(json.dumps(m, sort_keys=True) + "\n")
    if matches:
        raise AuditFailed(f"{len(matches)} contaminated documents found; see {path}")
    return {"matches": 0, "report": path}


HANDLERS = {
    "tok-train": cmd_tok_train,
    "tok-prune": cmd_tok_prune,
    "curate": cmd_curate,
    "teacher-cache": cmd_teacher_cache,
    "train": cmd_train,
    "eval": cmd_eval,
    "audit": cmd_audit,
}


def _fail(out, code, exc):
    detail = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("step", "rollbacks", "manifest_path"):
        if getattr(exc, attr, None) is not None:
            detail[attr] = getattr(exc, attr)
    print(f"lokiforge: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}", file=sys.stderr)
    print(json.dumps(detail, sort_keys=True), file=sys.stderr)
    if out and os.path.isdir(out):
        with open(os.path.join(out, "error.json"), "w") as f:
            json.dump(detail, f, indent=1, sort_keys=True)
    return code


def run(cmd):
    """Execute a parsed :class:`Command`; returns the process exit code."""
    out = cmd.out
    try:
        cfg = runconfig.resolve(cmd.config, cmd.overrides)
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "resolved_config.json"), "w") as f:
            json.dump({"command": cmd.subcommand, "seed": cfg["trainer"]["seed"], "config": cfg},
                      f, indent=1, sort_keys=True)
        t0 = time.time()
        result = HANDLERS[cmd.subcommand](cfg, out, cmd)
        result = {"command": cmd.subcommand, "elapsed_s": round(time.time() - t0, 3), **result}
        with open(os.path.join(out, "result.json"), "w") as f:
            json.dump(result, f, indent=1, sort_keys=True, default=str)
        print(json.dumps(result, sort_keys=True, default=str))
        return 0
    except UsageError as e:
        return _fail(out, 2, e)
    except RollbackLimitExceeded as e:
        return _fail(out, 3, e)
    except (LokiError, OSError, ValueError) as e:
        return _fail(out, 1, e)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_args(argv)
    except UsageError as e:
        print(f"lokiforge: usage error: {e}", file=sys.stderr)
        return 2
    return run(cmd)


if __name__ == "__main__":
    sys.exit(main())
