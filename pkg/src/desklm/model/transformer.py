"""Grouped-query attention, pre-norm blocks and the weight-tied decoder."""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .. import autodiff as ad
from ..autodiff import Var, no_grad
from ..errors import CapacityError, ConfigError, FormatError, InputError, NumericError, ShapeError
from .config import ModelConfig
from .layers import RopeFrequencies, apply_rope, repeat_kv, rms_norm, rope_frequencies, swiglu

INIT_STD = 0.02


@dataclass
class AttnParams:
    w_q: np.ndarray  # [d_model, d_model]
    w_k: np.ndarray  # [d_model, n_kv_heads * head_dim]
    w_v: np.ndarray
    w_o: np.ndarray  # [d_model, d_model]


@dataclass
class FfnParams:
    w1: np.ndarray  # [d_model, d_ff]
    w3: np.ndarray  # [d_model, d_ff]
    w2: np.ndarray  # [d_ff, d_model]


@dataclass
class BlockParams:
    attn: AttnParams
    ffn: FfnParams
    gamma_attn: np.ndarray
    gamma_ffn: np.ndarray


@dataclass
class ModelParams:
    config: ModelConfig
    embedding: np.ndarray
    blocks: list[BlockParams]
    final_norm: np.ndarray
    lm_head: np.ndarray | None = None  # only when embeddings are untied

    def output_projection(self):
        """``[d_model, vocab]`` logit projection; a transposed view of the embedding when tied."""
        if self.config.tie_embeddings:
            return self.embedding.T
        return self.lm_head.T

    def named_parameters(self) -> Iterator[tuple[str, object]]:
        """All parameters in checkpoint declaration order."""
        yield "embedding", self.embedding
        for i, b in enumerate(self.blocks):
            p = f"blocks.{i}."
            yield p + "gamma_attn", b.gamma_attn
            yield p + "attn.w_q", b.attn.w_q
            yield p + "attn.w_k", b.attn.w_k
            yield p + "attn.w_v", b.attn.w_v
            yield p + "attn.w_o", b.attn.w_o
            yield p + "gamma_ffn", b.gamma_ffn
            yield p + "ffn.w1", b.ffn.w1
            yield p + "ffn.w3", b.ffn.w3
            yield p + "ffn.w2", b.ffn.w2
        yield "final_norm", self.final_norm
        if self.lm_head is not None:
            yield "lm_head", self.lm_head

    def map(self, fn) -> "ModelParams":
        """New ModelParams with ``fn(name, leaf)`` applied to every parameter."""
        return _build(self.config, dict((n, fn(n, v)) for n, v in self.named_parameters()))

    def as_vars(self) -> "ModelParams":
        """Trainable Var leaves sharing storage with these arrays."""
        return self.map(lambda n, a: Var(a, requires_grad=True, name=n))

    def astype(self, dtype) -> "ModelParams":
        return self.map(lambda n, a: np.asarray(a, dtype=dtype))


def _build(config: ModelConfig, named: dict) -> ModelParams:
    blocks = []
    for i in range(config.n_layers):
        p = f"blocks.{i}."
        blocks.append(BlockParams(
            attn=AttnParams(named[p + "attn.w_q"], named[p + "attn.w_k"], named[p + "attn.w_v"], named[p + "attn.w_o"]),
            ffn=FfnParams(named[p + "ffn.w1"], named[p + "ffn.w3"], named[p + "ffn.w2"]),
            gamma_attn=named[p + "gamma_attn"],
            gamma_ffn=named[p + "gamma_ffn"],
        ))
    return ModelParams(config, named["embedding"], blocks, named["final_norm"], named.get("lm_head"))


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    c = config
    shapes = {"embedding": (c.vocab_size, c.d_model)}
    for i in range(c.n_layers):
        p = f"blocks.{i}."
        shapes.update({
            p + "gamma_attn": (c.d_model,),
            p + "attn.w_q": (c.d_model, c.d_model),
            p + "attn.w_k": (c.d_model, c.kv_dim),
            p + "attn.w_v": (c.d_model, c.kv_dim),
            p + "attn.w_o": (c.d_model, c.d_model),
            p + "gamma_ffn": (c.d_model,),
            p + "ffn.w1": (c.d_model, c.d_ff),
            p + "ffn.w3": (c.d_model, c.d_ff),
            p + "ffn.w2": (c.d_ff, c.d_model),
        })
    shapes["final_norm"] = (c.d_model,)
    if not c.tie_embeddings:
        shapes["lm_head"] = (c.vocab_size, c.d_model)
    return shapes


def init_params(config: ModelConfig, seed: int = 0, dtype=np.float32) -> ModelParams:
    """Projections ~ N(0, 0.02), norm gains = 1, no biases."""
    rng = np.random.default_rng(seed)
    named = {}
    for name, shape in param_shapes(config).items():
        if len(shape) == 1:
            named[name] = np.ones(shape, dtype=dtype)
        else:
            named[name] = (rng.standard_normal(shape) * INIT_STD).astype(dtype)
    return _build(config, named)


# forward ---------------------------------------------------------------------

def kv_groups(n_heads: int, n_kv_heads: int) -> int:
    if n_kv_heads < 1 or n_heads % n_kv_heads:
        raise ConfigError(f"{n_heads} query heads cannot be grouped over {n_kv_heads} kv heads")
    return n_heads // n_kv_heads


def _finite(v: Var, what: str) -> Var:
    if not np.isfinite(v.data).all():
        raise NumericError(f"non-finite values in {what}")
    return v


def causal_mask(n_query: int, n_key: int, offset: int, dtype) -> np.ndarray:
    """Additive mask: query i (absolute position offset+i) sees keys j <= offset+i."""
    q = np.arange(n_query)[:, None] + offset
    k = np.arange(n_key)[None, :]
    return np.where(k > q, -np.inf, 0.0).astype(dtype)


def _attention(x, attn: AttnParams, freqs: RopeFrequencies, cache=None, layer: int = 0) -> Var:
    x = ad.as_var(x)
    if x.data.ndim != 3:
        raise ShapeError(f"attention input must be [batch, seq, d_model], got {x.shape}")
    b, s, d = x.shape
    hd = freqs.head_dim
    if d % hd:
        raise ShapeError(f"d_model {d} is not a multiple of head_dim {hd}")
    n_heads = d // hd
    n_kv = np.shape(attn.w_k)[1] // hd
    groups = kv_groups(n_heads, n_kv)
    past = cache.length(layer) if cache is not None else 0
    if past + s > freqs.max_seq:
        raise CapacityError(f"sequence of {past + s} tokens exceeds max_seq {freqs.max_seq}")
    positions = np.arange(past, past + s)

    q = ad.reshape(ad.matmul(x, attn.w_q), (b, s, n_heads, hd))
    k = ad.reshape(ad.matmul(x, attn.w_k), (b, s, n_kv, hd))
    v = ad.reshape(ad.matmul(x, attn.w_v), (b, s, n_kv, hd))
    q = apply_rope(q, positions, freqs)
    k = apply_rope(k, positions, freqs)
    if cache is not None:
        cache.append(layer, k.data, v.data)
        k = Var(cache.keys(layer))
        v = Var(cache.values(layer))
    t = k.shape[1]

    qh = ad.transpose(q, (0, 2, 1, 3))                  # [b, h, s, hd]
    kh = ad.transpose(repeat_kv(k, groups), (0, 2, 3, 1))  # [b, h, hd, t]
    vh = ad.transpose(repeat_kv(v, groups), (0, 2, 1, 3))  # [b, h, t, hd]
    scores = ad.add(ad.scale(ad.matmul(qh, kh), 1.0 / math.sqrt(hd)), causal_mask(s, t, past, x.dtype))
    probs = ad.softmax(scores, axis=-1)
    ctx = ad.reshape(ad.transpose(ad.matmul(probs, vh), (0, 2, 1, 3)), (b, s, d))
    return _finite(ad.matmul(ctx, attn.w_o), "attention output")


@ad.differentiable
def gqa_attention(x, attn: AttnParams, freqs: RopeFrequencies, cache=None, layer: int = 0):
    """Causal grouped-query attention of ``x[b, s, d_model]``.

    q/k/v projections, rotary encoding of q and k, kv heads repeated over their
    query group, softmax(q k^T / sqrt(head_dim)) v, output projection. With a
    cache the new keys/values are appended first and attention spans the whole
    history.
    """
    return _attention(x, attn, freqs, cache, layer)


def _block(x, block: BlockParams, freqs, eps, cache=None, layer=0) -> Var:
    h1 = ad.add(x, _attention(rms_norm(ad.as_var(x), block.gamma_attn, eps), block.attn, freqs, cache, layer))
    ffn = block.ffn
    h2 = ad.add(h1, swiglu(rms_norm(h1, block.gamma_ffn, eps), ffn.w1, ffn.w2, ffn.w3))
    return h2


@ad.differentiable
def transformer_block(x, block: BlockParams, freqs: RopeFrequencies, eps: float = 1e-6, cache=None, layer: int = 0):
    """``h1 = x + GQA(RMSNorm(x))``; ``h2 = h1 + SwiGLU(RMSNorm(h1))``."""
    return _block(x, block, freqs, eps, cache, layer)


def _is_trainable(params: ModelParams) -> bool:
    return isinstance(params.embedding, Var)


_FREQ_CACHE: dict[tuple, RopeFrequencies] = {}


def freqs_for(config: ModelConfig) -> RopeFrequencies:
    key = (config.head_dim, config.max_seq, config.rope_theta)
    if key not in _FREQ_CACHE:
        _FREQ_CACHE[key] = rope_frequencies(config)
    return _FREQ_CACHE[key]


def _check_tokens(config: ModelConfig, tokens, past: int = 0) -> np.ndarray:
    ids = np.asarray(tokens, dtype=np.int64)
    if ids.ndim not in (1, 2):
        raise ShapeError("tokens must be [seq] or [batch, seq]")
    if ids.size and (ids.min() < 0 or ids.max() >= config.vocab_size):
        raise InputError(f"token ids must lie in [0, {config.vocab_size})")
    if past + ids.shape[-1] > config.max_seq:
        raise CapacityError(f"{past + ids.shape[-1]} tokens exceed max_seq {config.max_seq}")
    return ids


def forward_var(params: ModelParams, tokens, cache=None) -> Var:
    cfg = params.config
    past = cache.length(cfg.n_layers - 1) if cache is not None else 0
    ids = _check_tokens(cfg, tokens, past)
    single = ids.ndim == 1
    if single:
        ids = ids[None, :]
    freqs = freqs_for(cfg)
    h = ad.embedding(params.embedding, ids)
    for i, block in enumerate(params.blocks):
        h = _block(h, block, freqs, cfg.norm_eps, cache, i)
    h = rms_norm(h, params.final_norm, cfg.norm_eps)
    head = params.embedding if cfg.tie_embeddings else params.lm_head
    logits = _finite(ad.matmul(h, ad.transpose(ad.as_var(head), (1, 0))), "logits")
    if single:
        logits = ad.reshape(logits, logits.shape[1:])
    return logits


def model_forward(params: ModelParams, tokens, cache=None):
    """Logits ``[seq, vocab]`` (or ``[batch, seq, vocab]``) for the given token ids."""
    if _is_trainable(params):
        return forward_var(params, tokens, cache)
    with no_grad():
        return forward_var(params, tokens, cache).data


# checkpoint ------------------------------------------------------------------

CHECKPOINT_MAGIC = b"DESKLMCK"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: ModelParams, path: str | os.PathLike) -> None:
    """Layout: magic(8) | u32 header_len | header JSON | float32 LE blobs in declaration order."""
    named = list(params.named_parameters())
    header = {
        "format_version": CHECKPOINT_VERSION,
        "config": params.config.to_dict(),
        "params": [{"name": n, "shape": list(np.shape(a))} for n, a in named],
    }
    raw = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for _, a in named:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def load_checkpoint(path: str | os.PathLike, dtype=np.float32) -> ModelParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise FormatError("not a model checkpoint (bad magic)")
    (hlen,) = struct.unpack("<I", blob[8:12])
    try:
        header = json.loads(blob[12:12 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt checkpoint header: {exc}") from exc
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint format_version {header.get('format_version')!r}")
    config = ModelConfig.from_dict(header["config"])
    expected = param_shapes(config)
    listed = [(p["name"], tuple(p["shape"])) for p in header["params"]]
    if listed != list(expected.items()):
        raise FormatError("checkpoint parameter list does not match its config")
    offset = 12 + hlen
    named = {}
    for name, shape in listed:
        n = int(np.prod(shape))
        chunk = blob[offset:offset + 4 * n]
        if len(chunk) != 4 * n:
            raise FormatError(f"checkpoint truncated in parameter {name}")
        named[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(dtype)
        offset += 4 * n
    if offset != len(blob):
        raise FormatError("trailing bytes after the last parameter")
    return _build(config, named)
