"""Chars-per-token compression and the effective-context arithmetic built on it."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ConfigError, InputError
from .tokenizer.core import Tokenizer


@dataclass(frozen=True)
class CompressionReport:
    corpus_chars: int
    corpus_tokens: int
    chars_per_token: float
    vocab_size: int

    def to_dict(self) -> dict:
        return asdict(self)


def compression_of_text(tokenizer: Tokenizer, text: str) -> CompressionReport:
    """Characters are Unicode scalar values (``len`` of the decoded str), not bytes."""
    chars = len(text)
    tokens = sum(len(tokenizer.encode_fast(line)) for line in text.splitlines(keepends=True))
    if chars == 0 or tokens == 0:
        raise InputError("corpus is empty")
    return CompressionReport(chars, tokens, chars / tokens, tokenizer.vocab_size)


def compression_ratio(tokenizer: Tokenizer, corpus_path: str | os.PathLike) -> CompressionReport:
    try:
        text = Path(corpus_path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {corpus_path}: {exc}") from exc
    return compression_of_text(tokenizer, text)


def effective_context(physical_context: float, ratio: float) -> float:
    """Characters covered by a context window, rounded to two decimals."""
    if physical_context <= 0 or ratio <= 0:
        raise ConfigError("context and ratio must be positive")
    return round(physical_context * ratio, 2)
