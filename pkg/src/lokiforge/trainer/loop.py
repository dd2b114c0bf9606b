"""The training loop: batch ramp, optional distillation, spike rollback, checkpoints."""

import json
import logging
import math
import os

import numpy as np

from ..distill import kd_schedule, min_ce_loss, regen_on_contamination, teacher_logits
from ..errors import RollbackLimitExceeded
from ..model import TransformerModel
from ..numerics import Tape, backward, cross_entropy
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .data import hash64
from .optim import AdamW, clip_grad_norm
from .schedule import batch_size_at, lr_at, planned_steps
from .spike import SpikeDetector

log = logging.getLogger(__name__)


class Trainer:
    """Single-threaded deterministic trainer.

    Batch content is a pure function of ``(seed, sequences_seen)``, so two runs
    with the same config and shards are bit-identical, and so is a run resumed
    from any of its checkpoints.
    """

    def __init__(self, model_cfg, cfg, windows, out_dir, teachers=(), registry=None, tokenizer=None):
        if windows.seq_len != cfg.seq_len:
            raise ValueError(f"windows have seq_len {windows.seq_len}, config says {cfg.seq_len}")
        if windows.vocab_size is not None and windows.vocab_size != model_cfg.vocab_size:
            raise ValueError(f"shard vocab {windows.vocab_size} != model vocab {model_cfg.vocab_size}")
        if registry is not None and tokenizer is None:
            raise ValueError("KD regeneration needs the tokenizer to decode batches")
        self.model_cfg = model_cfg
        self.cfg = cfg
        self.windows = windows
        self.out_dir = out_dir
        self.teachers = list(teachers)
        self.registry = registry
        self.tokenizer = tokenizer
        os.makedirs(os.path.join(out_dir, "checkpoints"), exist_ok=True)

        T = cfg.seq_len
        if cfg.total_tokens:
            self.total_sequences = int(math.ceil(cfg.total_tokens / T))
        else:
            self.total_sequences = cfg.epochs * windows.n
        self.total_tokens = self.total_sequences * T
        self.warmup_tokens = cfg.warmup_token_fraction * self.total_tokens
        self.planned_steps = planned_steps(
            self.total_sequences, T, cfg.batch_size_initial, cfg.batch_size_max, self.warmup_tokens, cfg.max_steps
        )

        self.model = TransformerModel(model_cfg, seed=cfg.seed)
        self.opt = AdamW(
            self.model.named_parameters(), cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay
        )
        self.step = 0
        self.tokens_seen = 0
        self.sequences_seen = 0
        self.seed = cfg.seed
        self.rng = np.random.default_rng(cfg.seed)
        self.rollback_count = 0
        self.total_rollbacks = 0
        self.detector = SpikeDetector(cfg.spike_window, cfg.spike_sigma, cfg.spike_floor)
        self.checkpoints = []
        self._injections = {int(s): 0 for s in cfg.inject_spike_steps}
        self.losses = []
        self.events = []
        self._log = open(os.path.join(out_dir, "metrics.jsonl"), "a")

    # ------------------------------------------------------------------ state

    def snapshot(self):
        m, v, t = self.opt.state()
        return Checkpoint(
            step=self.step,
            tokens_seen=self.tokens_seen,
            sequences_seen=self.sequences_seen,
            seed=self.seed,
            rng_state=self.rng.bit_generator.state,
            rollback_count=self.rollback_count,
            model_config=self.model_cfg,
            params=self.model.state_dict(),
            adam_m={k: a.copy() for k, a in m.items()},
            adam_v={k: a.copy() for k, a in v.items()},
            adam_t=t,
            spike_history=list(self.detector.buffer),
            train_config_hash=self.cfg.config_hash(),
        )

    def restore(self, ck):
        self.model.load_state_dict(ck.params)
        self.opt.load(ck.adam_m, ck.adam_v, ck.adam_t)
        self.step = ck.step
        self.tokens_seen = ck.tokens_seen
        self.sequences_seen = ck.sequences_seen
        self.seed = ck.seed
        self.rng = np.random.default_rng()
        self.rng.bit_generator.state = ck.rng_state
        self.detector.clear()
        for x in ck.spike_history:
            self.detector.push(x)

    def save(self):
        path = os.path.join(self.out_dir, "checkpoints", f"ckpt_{self.step:08d}.lkcp")
        self.rollback_count = 0
        save_checkpoint(self.snapshot(), path)
        if path not in self.checkpoints:
            self.checkpoints.append(path)
        while len(self.checkpoints) > self.cfg.keep_checkpoints:
            old = self.checkpoints.pop(0)
            if os.path.exists(old):
                os.remove(old)
        self._emit({"event": "checkpoint", "step": self.step, "path": os.path.basename(path)})
        return path

    @classmethod
    def resume(cls, path, model_cfg, cfg, windows, out_dir, **kw):
        trainer = cls(model_cfg, cfg, windows, out_dir, **kw)
        ck = load_checkpoint(path, expected_config=model_cfg)
        trainer.restore(ck)
        trainer.rollback_count = ck.rollback_count
        trainer.checkpoints = [str(path)]
        return trainer

    def rollback(self):
        """Restore the latest checkpoint and derive a fresh data seed."""
        if not self.checkpoints:
            raise RollbackLimitExceeded("no checkpoint to roll back to", self.step, 0)
        if self.rollback_count >= self.cfg.max_rollbacks:
            raise RollbackLimitExceeded(
                f"{self.rollback_count} rollbacks already spent on the checkpoint at step "
                f"{self._ckpt_step()}; limit is {self.cfg.max_rollbacks}",
                self._ckpt_step(),
                self.rollback_count,
            )
        ck = load_checkpoint(self.checkpoints[-1], expected_config=self.model_cfg)
        count = self.rollback_count + 1
        self.restore(ck)
        self.seed = hash64(ck.seed, count)
        self.rollback_count = count
        self.total_rollbacks += 1
        self._emit(
            {"event": "rollback", "to_step": ck.step, "rollback_count": count, "seed": self.seed}
        )
        return ck

    def _ckpt_step(self):
        return int(os.path.basename(self.checkpoints[-1])[5:13]) if self.checkpoints else 0

    # ------------------------------------------------------------------- loop

    def done(self):
        if self.cfg.max_steps and self.step >= self.cfg.max_steps:
            return True
        return self.sequences_seen >= self.total_sequences

    def current_batch_size(self):
        cfg = self.cfg
        b = batch_size_at(self.tokens_seen, cfg.batch_size_initial, cfg.batch_size_max, self.warmup_tokens)
        return min(b, self.total_sequences - self.sequences_seen)

    def next_batch(self):
        ids = self.windows.batch_ids(self.seed, self.sequences_seen, self.current_batch_size())
        return ids, self.windows.windows(ids)

    def _replacements(self, step):
        rng = np.random.default_rng(hash64(self.seed, step, 0x5245))
        for wid in rng.permutation(self.windows.n):
            yield int(wid), self.windows.window(wid)

    def _injection(self, step):
        if step in self._injections and self._injections[step] < self.cfg.inject_spike_repeats:
            self._injections[step] += 1
            return self.cfg.inject_spike_kind
        return None

    def train_step(self, batch, seq_ids=None, kd=False, corrupt=None):
        """One optimizer step on ``batch`` [B, T+1].

        Returns metrics; ``metrics["spike"]`` True means the loss tripped the
        detector and no update was applied.
        """
        cfg = self.cfg
        step = self.step + 1
        inputs, targets = batch[:, :-1], batch[:, 1:]
        metrics = {"step": step, "batch_size": int(batch.shape[0]), "kd": bool(kd)}
        self.model.zero_grad()
        with Tape() as tape:
            logits = self.model(inputs)
            if corrupt == "corrupt":
                # least likely token everywhere: a guaranteed loss spike
                targets = np.argmin(logits.data, axis=-1)
            if kd:
                dists = [teacher_logits(t, inputs, self.model_cfg.vocab_size, seq_ids) for t in self.teachers]
                loss, branch, plain = min_ce_loss(logits, targets, dists, cfg.kd_granularity)
                hist = np.bincount(branch.ravel(), minlength=1 + len(self.teachers))
                metrics["branch_hist"] = hist.tolist()
                metrics["plain_ce"] = plain
            else:
                loss = cross_entropy(logits, targets)
        value = float(loss.data)
        if corrupt == "nan":
            value = float("nan")
        metrics["loss"] = value
        if self.detector.check(value):
            metrics["spike"] = True
            metrics["threshold"] = self.detector.threshold()
            return metrics
        backward(loss, tape)
        norm, clipped = clip_grad_norm(self.model.parameters(), cfg.grad_clip)
        lr = lr_at(step, self.planned_steps, cfg.lr, cfg.min_lr_ratio, cfg.lr_warmup_fraction)
        self.opt.step(lr)
        self.detector.push(value)
        self.step = step
        self.sequences_seen += int(batch.shape[0])
        self.tokens_seen += int(batch.shape[0]) * cfg.seq_len
        metrics.update(
            spike=False,
            lr=lr,
            grad_norm=norm,
            grad_norm_clipped=clipped,
            tokens_seen=self.tokens_seen,
            seed=self.seed,
        )
        return metrics

    def step_once(self):
        step = self.step + 1
        ids, batch = self.next_batch()
        kd = kd_schedule(step, self.cfg.kd_period) and bool(self.teachers)
        regen = 0
        if kd and self.registry is not None:
            batch, regen, replaced = regen_on_contamination(
                batch, self.registry, self._replacements(step), self.tokenizer
            )
            for row, wid in replaced.items():
                ids[row] = wid
        metrics = self.train_step(batch, ids, kd, self._injection(step))
        metrics["first_ids"] = ids[: min(4, len(ids))].tolist()
        if regen:
            metrics["regen"] = regen
        self._emit(metrics)
        if metrics["spike"]:
            self.events.append({"event": "spike", "step": step, "loss": metrics["loss"]})
            self.rollback()
            return metrics
        self.losses.append(metrics["loss"])
        if self.step % self.cfg.checkpoint_interval == 0:
            self.save()
        return metrics

    def run(self):
        if not self.checkpoints:
            self.save()
        while not self.done():
            self.step_once()
        if self._ckpt_step() != self.step or not self.checkpoints:
            self.save()
        summary = {
            "steps": self.step,
            "tokens_seen": self.tokens_seen,
            "total_tokens": self.total_tokens,
            "planned_steps": self.planned_steps,
            "rollbacks": self.total_rollbacks,
            "final_checkpoint": self.checkpoints[-1],
            "final_digest": self.model.digest(),
            "final_loss": self.losses[-1] if self.losses else None,
        }
        with open(os.path.join(self.out_dir, "summary.json"), "w") as f:
            json.dump(summary, f, indent=1, sort_keys=True)
        self._log.flush()
        return summary

    def _emit(self, rec):
        self._log.write(json.dumps(rec, sort_keys=True, default=_jsonable) + "\n")

    def close(self):
        self._log.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x)}")
