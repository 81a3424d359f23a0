from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 16
    n_heads: int = 12
    n_kv_heads: int = 4
    d_model: int = 1536
    d_ff: int = 6144
    vocab_size: int = 128_000
    max_seq: int = 2048
    rope_theta: float = 10_000.0
    norm_eps: float = 1e-6
    tie_embeddings: bool = True

    def __post_init__(self):
        for name in ("n_layers", "n_heads", "n_kv_heads", "d_model", "vocab_size", "max_seq"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d_ff < 0:
            raise ConfigError("d_ff must be >= 0")
        if self.n_heads % self.n_kv_heads:
            raise ConfigError(f"n_heads ({self.n_heads}) must be a multiple of n_kv_heads ({self.n_kv_heads})")
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})")
        if self.head_dim % 2:
            raise ConfigError(f"head_dim ({self.head_dim}) must be even for rotary pairs")
        if self.norm_eps <= 0 or self.rope_theta <= 0:
            raise ConfigError("norm_eps and rope_theta must be positive")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def kv_dim(self) -> int:
        return self.n_kv_heads * self.head_dim

    @property
    def groups(self) -> int:
        return self.n_heads // self.n_kv_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        doc = dict(doc)
        profile = doc.pop("profile", None)
        base = PROFILES[profile] if profile else cls()
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return replace(base, **doc)


PROFILES: dict[str, ModelConfig] = {
    "base": ModelConfig(),
    "swiglu-8/3": ModelConfig(d_ff=4096),
    "desk-tiny": ModelConfig(n_layers=2, n_heads=4, n_kv_heads=2, d_model=64, d_ff=171,
                             vocab_size=1024, max_seq=128),
}


def load_config(source: str | os.PathLike) -> ModelConfig:
    """Accept a profile name or a JSON file (fields, optionally with a ``profile`` base)."""
    if isinstance(source, str) and source in PROFILES:
        return PROFILES[source]
    try:
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such config file or profile: {source}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return ModelConfig.from_dict(doc)


def param_count(config: ModelConfig) -> dict[str, int]:
    """Parameter breakdown; a tied embedding is counted once."""
    c = config
    embedding = c.vocab_size * c.d_model * (1 if c.tie_embeddings else 2)
    attention = c.n_layers * (2 * c.d_model * c.d_model + 2 * c.d_model * c.kv_dim)
    ffn = c.n_layers * 3 * c.d_model * c.d_ff
    norms = (2 * c.n_layers + 1) * c.d_model
    return {
        "embedding": embedding,
        "attention": attention,
        "ffn": ffn,
        "norms": norms,
        "total": embedding + attention + ffn + norms,
    }
