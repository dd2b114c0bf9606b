"""Run configuration: one JSON document, nested sections, dotted-key overrides."""

import copy
import json
import os
from dataclasses import asdict, fields

from .datapipe.pipeline import CurationConfig
from .errors import UsageError
from .model import ModelConfig, preset
from .trainer.config import TrainConfig

DEFAULTS = {
    "corpus": {"path": None, "synthetic_docs": 2000, "synthetic_seed": 0, "plant_benchmarks": 0},
    "benchmarks": {"path": None, "synthetic_passages": 20, "n": 8},
    "tokenizer": {"path": None, "vocab_size": 512, "min_frequency": 2, "train_docs": 0,
                  "prune_to": 0, "round_fraction": 0.1},
    "curation": asdict(CurationConfig()),
    "model": {"preset": "desk", **{f.name: None for f in fields(ModelConfig)}},
    "trainer": TrainConfig().to_dict(),
    "data": {"shards": None, "resume": None},
    "teachers": {"checkpoints": [], "caches": [], "top_k": 64, "temperature": 1.0},
    "eval": {"checkpoint": None, "tasks": [], "synthetic_tasks": True, "shots": None, "seed": 0,
             "normalize": "mean", "perplexity": True, "items": 40},
    "audit": {"shards": None},
}


def parse_value(raw):
    """JSON if it parses (numbers, booleans, null, lists), else the raw string."""
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def set_dotted(cfg, key, value):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise UsageError(f"unknown config key {key!r}")
        node = node[p]
    if not isinstance(node, dict) or parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise UsageError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def merge(base, update, prefix=""):
    for k, v in update.items():
        key = f"{prefix}{k}"
        if k not in base:
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise UsageError(f"config key {key!r} must be an object")
            merge(base[k], v, key + ".")
        else:
            base[k] = v
    return base


def resolve(config_path=None, overrides=None):
    cfg = copy.deepcopy(DEFAULTS)
    if config_path is not None:
        if not os.path.isfile(config_path):
            raise UsageError(f"config file not found: {config_path}")
        try:
            with open(config_path) as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {config_path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        merge(cfg, data)
    for key, value in (overrides or {}).items():
        set_dotted(cfg, key, value)
    return cfg


def model_config(cfg, vocab_size=None):
    sec = dict(cfg["model"])
    name = sec.pop("preset")
    given = {k: v for k, v in sec.items() if v is not None}
    if vocab_size is not None:
        if "vocab_size" in given and given["vocab_size"] != vocab_size:
            raise UsageError(f"model.vocab_size={given['vocab_size']} but the data uses {vocab_size}")
        given["vocab_size"] = vocab_size
    try:
        return preset(name, **given) if name else ModelConfig(**given)
    except (KeyError, ValueError, TypeError) as e:
        raise UsageError(f"bad model config: {e}") from e


def train_config(cfg):
    try:
        return TrainConfig.from_dict(cfg["trainer"])
    except (ValueError, TypeError) as e:
        raise UsageError(f"bad trainer config: {e}") from e


def curation_config(cfg):
    try:
        return CurationConfig(**cfg["curation"])
    except TypeError as e:
        raise UsageError(f"bad curation config: {e}") from e
