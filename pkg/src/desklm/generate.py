from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContextOverflowError
from .kvcache import KvCache, incremental_decode
from .model.transformer import ModelParams
from .tokenizer.core import Tokenizer


@dataclass
class Generation:
    text: str
    prompt_ids: list[int]
    new_ids: list[int]
    step_logits: list[np.ndarray] = field(default_factory=list)


def sample_next(logits: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    if temperature == 0:
        return int(np.argmax(logits))
    z = np.asarray(logits, dtype=np.float64) / temperature
    p = np.exp(z - z.max())
    p /= p.sum()
    return int(rng.choice(p.size, p=p))


def decodable_mask(tokenizer: Tokenizer, vocab_size: int) -> np.ndarray:
    """True for ids the tokenizer can decode; padded, never-assigned slots are False."""
    ok = np.zeros(vocab_size, dtype=bool)
    ids = [i for i in tokenizer.vocab.inverse if i < vocab_size]
    ids += [i for i in tokenizer.specials.literals_by_internal().values() if i < vocab_size]
    ok[ids] = True
    return ok


def generate(params: ModelParams, tokenizer: Tokenizer, prompt: str, max_new: int, seed: int = 0,
             temperature: float = 0.0, keep_logits: bool = False) -> Generation:
    """Autoregressive continuation fed through the kv-cache, one token per step.

    Ids the tokenizer never assigned are excluded from sampling so the result
    always decodes. Raises ContextOverflowError if prompt plus continuation would exceed max_seq;
    nothing is silently truncated.
    """
    if max_new < 0 or temperature < 0:
        raise ConfigError("max_new and temperature must be non-negative")
    cfg = params.config
    prompt_ids = tokenizer.encode_fast(prompt, with_specials=True)
    if not prompt_ids:
        prompt_ids = [tokenizer.specials.internal_id("<s>")]
    if len(prompt_ids) + max_new > cfg.max_seq:
        raise ContextOverflowError(
            f"prompt ({len(prompt_ids)} tokens) + max_new ({max_new}) exceeds max_seq {cfg.max_seq}")
    out = Generation("", prompt_ids, [])
    if max_new == 0:
        return out
    rng = np.random.default_rng(seed)
    dtype = np.asarray(params.embedding).dtype
    cache = KvCache(cfg, batch=1, dtype=dtype)
    allowed = decodable_mask(tokenizer, cfg.vocab_size)
    logits = incremental_decode(params, prompt_ids, cache)
    for i in range(max_new):
        if keep_logits:
            out.step_logits.append(logits.copy())
        nxt = sample_next(np.where(allowed, logits, -np.inf), temperature, rng)
        out.new_ids.append(nxt)
        if i + 1 < max_new:
            logits = incremental_decode(params, [nxt], cache)
    out.text = tokenizer.decode(out.new_ids)
    return out
