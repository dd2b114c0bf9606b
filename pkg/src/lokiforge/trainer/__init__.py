from .checkpoint import Checkpoint, checkpoint_bytes, file_sha256, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data import TokenWindows, hash64
from .loop import Trainer
from .optim import AdamW, clip_grad_norm, global_grad_norm
from .schedule import batch_size_at, lr_at, planned_steps
from .spike import SpikeDetector, detect_spike

__all__ = [
    "AdamW",
    "Checkpoint",
    "SpikeDetector",
    "TokenWindows",
    "TrainConfig",
    "Trainer",
    "batch_size_at",
    "checkpoint_bytes",
    "clip_grad_norm",
    "detect_spike",
    "file_sha256",
    "global_grad_norm",
    "hash64",
    "load_checkpoint",
    "lr_at",
    "planned_steps",
    "save_checkpoint",
]
