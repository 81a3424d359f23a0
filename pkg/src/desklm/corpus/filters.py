"""Per-document quality stages: length bounds, perplexity percentile, plug-in verdicts."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from ..autodiff import no_grad
from ..errors import ConfigError
from ..model.transformer import ModelParams, forward_var
from ..tokenizer.core import Tokenizer
from ..training.optim import token_losses

KEEP = None


def length_filter(token_len: int, min_len: int = 100, max_len: int = 10_000) -> str | None:
    """``None`` to keep, otherwise the drop reason. Both bounds are inclusive."""
    if token_len < min_len:
        return "too_short"
    if token_len > max_len:
        return "too_long"
    return KEEP


class Scorer(Protocol):
    def token_losses(self, text: str) -> np.ndarray: ...


def perplexity(scorer: Scorer, text: str) -> float:
    losses = scorer.token_losses(text)
    return float(math.exp(np.mean(losses))) if losses.size else 1.0


def nearest_rank(values: Sequence[float], percentile: float) -> float:
    """Smallest value with at least ``percentile``% of the batch at or below it."""
    if not 0 < percentile <= 100:
        raise ConfigError("percentile must lie in (0, 100]")
    ordered = sorted(values)
    rank = max(1, math.ceil(percentile / 100.0 * len(ordered)))
    return ordered[rank - 1]


@dataclass(frozen=True)
class PerplexityCut:
    threshold: float | None
    perplexities: list[float]
    dropped: list[int]


def perplexity_filter(perplexities: Sequence[float], percentile: float = 85.0,
                      threshold: float | None = None) -> PerplexityCut:
    """Drop entries strictly above the nearest-rank percentile of the batch.

    A supplied ``threshold`` replaces the batch percentile, which is how a
    second pass reproduces the first one's decision.
    """
    ppl = [float(p) for p in perplexities]
    if not ppl:
        return PerplexityCut(threshold, [], [])
    cut = threshold if threshold is not None else nearest_rank(ppl, percentile)
    return PerplexityCut(cut, ppl, [i for i, p in enumerate(ppl) if p > cut])


class ModelScorer:
    """Per-token losses under a trained model, each chunk of ``max_seq`` tokens conditioned on ``<s>``."""

    def __init__(self, params: ModelParams, tokenizer: Tokenizer):
        if params.config.vocab_size != tokenizer.vocab_size:
            raise ConfigError("scorer model and tokenizer disagree on vocab size")
        self.params = params
        self.tokenizer = tokenizer
        self.bos = tokenizer.specials.internal_id("<s>")

    def token_losses(self, text: str) -> np.ndarray:
        ids = self.tokenizer.encode_fast(text)
        span = self.params.config.max_seq
        out = []
        with no_grad():
            for i in range(0, len(ids), span):
                target = ids[i:i + span]
                inputs = [self.bos] + target[:-1]
                logits = forward_var(self.params, np.asarray(inputs)).data
                out.append(token_losses(logits, target))
        return np.concatenate(out) if out else np.empty(0)


class UnigramScorer:
    """Add-one smoothed unigram model over token ids, fitted once on a reference set."""

    def __init__(self, tokenizer: Tokenizer, reference: Sequence[str]):
        self.tokenizer = tokenizer
        counts = Counter()
        for text in reference:
            counts.update(tokenizer.encode_fast(text))
        total = sum(counts.values()) + tokenizer.vocab_size
        self._logp = np.full(tokenizer.vocab_size, -math.log(total))
        for tid, c in counts.items():
            self._logp[tid] = math.log((c + 1) / total)

    def token_losses(self, text: str) -> np.ndarray:
        ids = np.asarray(self.tokenizer.encode_fast(text), dtype=np.int64)
        return -self._logp[ids]


Verdicts = Mapping[str, bool] | Callable[[str, str], bool]


def external_verdict(verdicts: Verdicts | None, doc_id: str, text: str) -> bool:
    """Plug-in hook for classifiers we do not ship (safety, language ID). ``True`` keeps.

    Accepts a mapping of id to verdict (missing ids are kept) or a callable
    ``(id, text) -> bool``; ``None`` keeps everything.
    """
    if verdicts is None:
        return True
    if callable(verdicts):
        return bool(verdicts(doc_id, text))
    return bool(verdicts.get(doc_id, True))
