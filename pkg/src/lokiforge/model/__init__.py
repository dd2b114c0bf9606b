from .config import PRESETS, ModelConfig, preset, swiglu_hidden
from .layers import alibi_bias, alibi_bias_heads, alibi_slopes, rmsnorm, swiglu_ff
from .transformer import (
    TransformerModel,
    count_parameters,
    greedy_decode,
    init_params,
    param_shapes,
    validate_tokens,
)

__all__ = [
    "PRESETS",
    "ModelConfig",
    "TransformerModel",
    "alibi_bias",
    "alibi_bias_heads",
    "alibi_slopes",
    "count_parameters",
    "greedy_decode",
    "init_params",
    "param_shapes",
    "preset",
    "rmsnorm",
    "swiglu_ff",
    "swiglu_hidden",
    "validate_tokens",
]
