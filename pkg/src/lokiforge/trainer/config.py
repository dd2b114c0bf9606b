import hashlib
import json
from dataclasses import asdict, dataclass, field, fields


@dataclass
class TrainConfig:
    total_tokens: int = 0  # 0 -> epochs * tokens in the shard windows
    epochs: int = 2
    max_steps: int = 0  # 0 -> no cap
    seq_len: int = 64
    batch_size_initial: int = 8
    batch_size_max: int = 32
    warmup_token_fraction: float = 0.1
    lr: float = 3e-3
    min_lr_ratio: float = 0.1
    lr_warmup_fraction: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.95
    adam_eps: float = 1e-8
    weight_decay: float = 0.1
    grad_clip: float = 1.0
    kd_period: int = 4
    kd_granularity: str = "token"
    spike_window: int = 100
    spike_sigma: float = 4.0
    spike_floor: float = 0.5
    checkpoint_interval: int = 500
    keep_checkpoints: int = 2
    max_rollbacks: int = 3
    seed: int = 0
    # drill hooks: corrupt the batch at these (1-based) steps, each firing up to
    # ``inject_spike_repeats`` times
    inject_spike_steps: list = field(default_factory=list)
    inject_spike_repeats: int = 1
    inject_spike_kind: str = "corrupt"

    def __post_init__(self):
        if not 1 <= self.batch_size_initial <= self.batch_size_max:
            raise ValueError("need 1 <= batch_size_initial <= batch_size_max")
        if not 0 < self.warmup_token_fraction <= 1:
            raise ValueError("warmup_token_fraction must lie in (0, 1]")
        if self.max_rollbacks < 1:
            raise ValueError("max_rollbacks must be >= 1")
        if self.seq_len < 1 or self.epochs < 1:
            raise ValueError("seq_len and epochs must be positive")
        if self.kd_granularity not in ("token", "sequence", "batch"):
            raise ValueError("kd_granularity must be token, sequence or batch")
        if self.inject_spike_kind not in ("corrupt", "nan"):
            raise ValueError("inject_spike_kind must be 'corrupt' or 'nan'")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self):
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()
