from .config import PROFILES, ModelConfig, load_config, param_count
from .layers import RopeFrequencies, apply_rope, layer_norm_ref, repeat_kv, rms_norm, rope_frequencies, swiglu
from .transformer import (
    AttnParams, BlockParams, FfnParams, ModelParams, causal_mask, freqs_for, gqa_attention, init_params,
    load_checkpoint, model_forward, param_shapes, save_checkpoint, transformer_block,
)

__all__ = [
    "PROFILES", "ModelConfig", "load_config", "param_count",
    "RopeFrequencies", "apply_rope", "layer_norm_ref", "repeat_kv", "rms_norm", "rope_frequencies", "swiglu",
    "AttnParams", "BlockParams", "FfnParams", "ModelParams", "causal_mask", "freqs_for", "gqa_attention",
    "init_params", "load_checkpoint", "model_forward", "param_shapes", "save_checkpoint", "transformer_block",
]
