"""Minimal reverse-mode autodiff over numpy arrays."""

from .gradcheck import gradcheck, numeric_grad, relative_error
from .ops import (
    add,
    cross_entropy,
    embedding,
    log_softmax_np,
    matmul,
    mean,
    mul,
    reshape,
    silu,
    softmax,
    softmax_np,
    sum,
    transpose,
)
from .tensor import Tape, Tensor, active_tape, backward, record

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "add",
    "backward",
    "cross_entropy",
    "embedding",
    "gradcheck",
    "log_softmax_np",
    "matmul",
    "mean",
    "mul",
    "numeric_grad",
    "record",
    "relative_error",
    "reshape",
    "silu",
    "softmax",
    "softmax_np",
    "sum",
    "transpose",
]
