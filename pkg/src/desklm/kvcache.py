"""Incremental-decoding key/value cache and the inference memory estimator."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import no_grad
from .errors import CapacityError, ConfigError, ShapeError
from .model.config import ModelConfig, param_count
from .model.transformer import ModelParams, forward_var

MIB = 1 << 20


class KvCache:
    """Preallocated per-layer ``[batch, capacity, n_kv_heads, head_dim]`` key/value storage.

    Append-only. Each layer tracks its own fill level while a forward pass is
    in flight; between passes every layer holds the same number of positions.
    """

    def __init__(self, config: ModelConfig, batch: int = 1, dtype=np.float32, capacity: int | None = None):
        self.config = config
        self.batch = batch
        self.capacity = capacity or config.max_seq
        shape = (batch, self.capacity, config.n_kv_heads, config.head_dim)
        self._k = [np.zeros(shape, dtype=dtype) for _ in range(config.n_layers)]
        self._v = [np.zeros(shape, dtype=dtype) for _ in range(config.n_layers)]
        self._len = [0] * config.n_layers

    def length(self, layer: int) -> int:
        return self._len[layer]

    @property
    def filled_len(self) -> int:
        return min(self._len)

    def append(self, layer: int, k_new: np.ndarray, v_new: np.ndarray) -> None:
        expect = (self.batch, self.config.n_kv_heads, self.config.head_dim)
        if k_new.shape != v_new.shape or (k_new.shape[0], *k_new.shape[2:]) != expect:
            raise ShapeError(f"cache expects [{self.batch}, n, {expect[1]}, {expect[2]}], got {k_new.shape}/{v_new.shape}")
        start = self._len[layer]
        stop = start + k_new.shape[1]
        if stop > self.capacity:
            raise CapacityError(f"cache capacity {self.capacity} exceeded ({stop} positions requested)")
        self._k[layer][:, start:stop] = k_new
        self._v[layer][:, start:stop] = v_new
        self._len[layer] = stop

    def keys(self, layer: int) -> np.ndarray:
        return self._k[layer][:, : self._len[layer]]

    def values(self, layer: int) -> np.ndarray:
        return self._v[layer][:, : self._len[layer]]

    def nbytes(self) -> int:
        return sum(a.nbytes for a in self._k) + sum(a.nbytes for a in self._v)


def cache_append(cache: KvCache, layer: int, k_new: np.ndarray, v_new: np.ndarray) -> None:
    cache.append(layer, k_new, v_new)


def incremental_decode(params: ModelParams, tokens, cache: KvCache) -> np.ndarray:
    """Feed ``tokens`` (the positions not yet cached) and return logits of the last one."""
    with no_grad():
        logits = forward_var(params, np.asarray(tokens, dtype=np.int64), cache).data
    return logits[-1]


@dataclass(frozen=True)
class MemoryEstimate:
    weights_bytes: int
    kv_cache_bytes_per_layer: int
    kv_cache_bytes_total: int
    activations_bytes: int
    total_bytes: int
    batch: int
    seq: int
    dtype_bytes: int
    attention_kind: str

    def to_dict(self) -> dict:
        out = asdict(self)
        out["assumptions"] = {"batch": self.batch, "seq": self.seq, "dtype_bytes": self.dtype_bytes}
        return out

    def mib(self, field: str) -> float:
        return getattr(self, field) / MIB


def memory_estimate(config: ModelConfig, batch: int, seq: int, dtype_bytes: int,
                    attention_kind: str = "gqa") -> MemoryEstimate:
    """Inference memory model.

    KV per layer is ``2 * batch * seq * kv_heads * head_dim * dtype_bytes`` with
    ``kv_heads = n_heads`` for MHA and ``n_kv_heads`` for GQA. Activations use a
    single-block peak of ``batch * seq * (4 d_model + 2 d_ff + n_heads * seq)``
    elements; that formula is a modelling choice, not a measured figure.
    """
    kind = attention_kind.lower()
    if kind not in ("mha", "gqa"):
        raise ConfigError(f"attention_kind must be 'mha' or 'gqa', got {attention_kind!r}")
    if min(batch, seq, dtype_bytes) <= 0:
        raise ConfigError("batch, seq and dtype_bytes must be positive")
    c = config
    kv_heads = c.n_heads if kind == "mha" else c.n_kv_heads
    per_layer = 2 * batch * seq * kv_heads * c.head_dim * dtype_bytes
    # Weights are held fixed across attention kinds so only the cache term moves.
    weights = param_count(c)["total"] * dtype_bytes
    kv_total = per_layer * c.n_layers
    acts = batch * seq * (4 * c.d_model + 2 * c.d_ff + c.n_heads * seq) * dtype_bytes
    return MemoryEstimate(
        weights_bytes=weights,
        kv_cache_bytes_per_layer=per_layer,
        kv_cache_bytes_total=kv_total,
        activations_bytes=acts,
        total_bytes=weights + kv_total + acts,
        batch=batch,
        seq=seq,
        dtype_bytes=dtype_bytes,
        attention_kind=kind,
    )
