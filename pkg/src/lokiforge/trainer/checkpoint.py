"""``LKCP`` checkpoint files.

Layout (little-endian)::

    magic "LKCP" | version u32 | model config sha256 (32 raw bytes)
    meta_len u32 | meta JSON (utf-8)
    n_tensors u32 | per tensor: name_len u16, name, dtype u8, ndim u8,
                    shape u32 x ndim, offset u64, nbytes u64
    payload (tensors back to back)
    sha256 of everything above (32 bytes)
"""

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from ..errors import ChecksumMismatch, ConfigMismatch, IoFailure
from ..model import ModelConfig

MAGIC = b"LKCP"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("<i8")}
_CODES = {v: k for k, v in _DTYPES.items()}


@dataclass
class Checkpoint:
    step: int
    tokens_seen: int
    sequences_seen: int
    seed: int
    rng_state: dict
    rollback_count: int
    model_config: ModelConfig
    params: dict
    adam_m: dict
    adam_v: dict
    adam_t: int
    spike_history: list = field(default_factory=list)
    train_config_hash: str = ""

    def tensors(self):
        out = {}
        for k, v in self.params.items():
            out[f"param/{k}"] = v
        for k, v in self.adam_m.items():
            out[f"adam_m/{k}"] = v
        for k, v in self.adam_v.items():
            out[f"adam_v/{k}"] = v
        out["spike_history"] = np.asarray(self.spike_history, dtype=np.float64)
        return out

    def params_digest(self):
        """Same digest as :meth:`TransformerModel.digest` for identical parameters."""
        h = hashlib.sha256()
        for name, arr in self.params.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def payload_sha256(self):
        h = hashlib.sha256()
        for arr in self.tensors().values():
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def _meta(ck):
    return {
        "step": ck.step,
        "tokens_seen": ck.tokens_seen,
        "sequences_seen": ck.sequences_seen,
        "seed": ck.seed,
        "rng_state": ck.rng_state,
        "rollback_count": ck.rollback_count,
        "model_config": ck.model_config.to_dict(),
        "adam_t": ck.adam_t,
        "train_config_hash": ck.train_config_hash,
    }


def checkpoint_bytes(ck):
    meta = json.dumps(_meta(ck), sort_keys=True).encode()
    tensors = ck.tensors()
    table = [struct.pack("<I", len(tensors))]
    payload = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        dt = arr.dtype.newbyteorder("<")
        code = _CODES[np.dtype(dt.str)]
        raw = arr.astype(dt, copy=False).tobytes()
        nb = name.encode()
        table.append(struct.pack("<H", len(nb)) + nb)
        table.append(struct.pack("<BB", code, arr.ndim))
        table.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        table.append(struct.pack("<QQ", offset, len(raw)))
        payload.append(raw)
        offset += len(raw)
    head = (
        MAGIC
        + struct.pack("<I", VERSION)
        + bytes.fromhex(ck.model_config.config_hash())
        + struct.pack("<I", len(meta))
        + meta
    )
    body = head + b"".join(table) + b"".join(payload)
    return body + hashlib.sha256(body).digest()


def save_checkpoint(ck, path):
    """Atomic write: temp file in the same directory, then rename."""
    blob = checkpoint_bytes(ck)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as f:
            f.write(blob)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as e:
        raise IoFailure(f"cannot write checkpoint {path}: {e}") from e
    return path


def load_checkpoint(path, expected_config=None):
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read checkpoint {path}: {e}") from e
    if len(blob) < 4 + 4 + 32 + 4 + 32:
        raise ChecksumMismatch(f"{path}: truncated checkpoint")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumMismatch(f"{path}: checkpoint checksum mismatch")
    if body[:4] != MAGIC:
        raise ChecksumMismatch(f"{path}: not a checkpoint")
    (version,) = struct.unpack_from("<I", body, 4)
    if version != VERSION:
        raise ChecksumMismatch(f"{path}: unsupported checkpoint version {version}")
    cfg_hash = body[8:40].hex()
    (meta_len,) = struct.unpack_from("<I", body, 40)
    pos = 44
    meta = json.loads(body[pos : pos + meta_len])
    pos += meta_len
    cfg = ModelConfig.from_dict(meta["model_config"])
    if cfg.config_hash() != cfg_hash:
        raise ChecksumMismatch(f"{path}: stored config does not match its hash")
    if expected_config is not None and expected_config.config_hash() != cfg_hash:
        raise ConfigMismatch(f"{path}: checkpoint model config differs from the requested one")
    (n,) = struct.unpack_from("<I", body, pos)
    pos += 4
    entries = []
    for _ in range(n):
        (nlen,) = struct.unpack_from("<H", body, pos)
        pos += 2
        name = body[pos : pos + nlen].decode()
        pos += nlen
        code, ndim = struct.unpack_from("<BB", body, pos)
        pos += 2
        shape = struct.unpack_from(f"<{ndim}I", body, pos)
        pos += 4 * ndim
        off, nbytes = struct.unpack_from("<QQ", body, pos)
        pos += 16
        entries.append((name, _DTYPES[code], shape, off, nbytes))
    base = pos
    tensors = {}
    for name, dt, shape, off, nbytes in entries:
        arr = np.frombuffer(body, dtype=dt, count=nbytes // dt.itemsize, offset=base + off)
        tensors[name] = arr.reshape(shape).astype(dt.newbyteorder("="), copy=True)

    def group(prefix):
        return {k[len(prefix) :]: v for k, v in tensors.items() if k.startswith(prefix)}

    return Checkpoint(
        step=meta["step"],
        tokens_seen=meta["tokens_seen"],
        sequences_seen=meta["sequences_seen"],
        seed=meta["seed"],
        rng_state=meta["rng_state"],
        rollback_count=meta["rollback_count"],
        model_config=cfg,
        params=group("param/"),
        adam_m=group("adam_m/"),
        adam_v=group("adam_v/"),
        adam_t=meta["adam_t"],
        spike_history=tensors.get("spike_history", np.zeros(0)).tolist(),
        train_config_hash=meta.get("train_config_hash", ""),
    )


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
