"""Desk-scale byte-level BPE tokenizer and compact grouped-query-attention transformer."""

from .errors import (CapacityError, ConfigError, ContextOverflowError, DecodeError, DeskLMError, DomainError,
                     FormatError, InputError, NumericError, ShapeError)
from .generate import generate
from .kvcache import KvCache, MemoryEstimate, incremental_decode, memory_estimate
from .metrics import CompressionReport, compression_ratio, effective_context
from .model import ModelConfig, init_params, load_checkpoint, model_forward, param_count, save_checkpoint
from .tokenizer import Tokenizer, TrainerConfig, batch_encode

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "ConfigError", "ContextOverflowError", "DecodeError", "DeskLMError", "DomainError",
    "FormatError", "InputError", "NumericError", "ShapeError",
    "generate", "KvCache", "MemoryEstimate", "incremental_decode", "memory_estimate",
    "CompressionReport", "compression_ratio", "effective_context",
    "ModelConfig", "init_params", "load_checkpoint", "model_forward", "param_count", "save_checkpoint",
    "Tokenizer", "TrainerConfig", "batch_encode",
]
