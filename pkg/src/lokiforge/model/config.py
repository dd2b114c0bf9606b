import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields


def swiglu_hidden(d_model, multiple_of=8):
    """Feed-forward width: two thirds of 4*d_model, rounded up to ``multiple_of``."""
    return int(math.ceil(4 * d_model * 2 / 3 / multiple_of) * multiple_of)


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 2
    n_heads: int = 4
    d_model: int = 64
    vocab_size: int = 512
    max_seq_len: int = 128
    d_ff: int = 0  # 0 -> swiglu_hidden(d_model)
    rms_eps: float = 1e-5
    init_std: float = 0.02

    def __post_init__(self):
        for name in ("n_layers", "n_heads", "d_model", "vocab_size", "max_seq_len"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if self.d_ff < 0:
            raise ValueError("d_ff must be >= 0")
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", swiglu_hidden(self.d_model))
        if not self.rms_eps >= 0:
            raise ValueError("rms_eps must be >= 0")

    @property
    def head_dim(self):
        return self.d_model // self.n_heads

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**data)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


PRESETS = {
    "lokilm-full": dict(n_layers=24, n_heads=32, d_model=2048, vocab_size=32000, max_seq_len=2048),
    "desk": dict(n_layers=2, n_heads=4, d_model=64, vocab_size=512, max_seq_len=128),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ModelConfig(**{**PRESETS[name], **overrides})
