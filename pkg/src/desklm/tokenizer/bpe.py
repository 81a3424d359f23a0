"""Byte-level BPE training.

``count_pairs`` and ``apply_merge`` are the plain list-based primitives. ``train``
runs the same greedy loop on a flat numpy array and updates pair counts
incrementally around each merge site, so a merge costs one vectorised scan
instead of a full recount.
"""

from __future__ import annotations

import heapq
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError
from .specials import RESERVED_SLOTS

log = logging.getLogger(__name__)

Pair = tuple[int, int]
_SEP = -1
_COUNT_CHUNK = 1 << 24


@dataclass(frozen=True)
class MergeRule:
    left: bytes
    right: bytes
    result_id: int
    rank: int

    @property
    def result(self) -> bytes:
        return self.left + self.right


@dataclass(frozen=True)
class TrainerConfig:
    vocab_size: int = 128_000
    min_frequency: int = 2

    def __post_init__(self):
        if self.min_frequency < 1:
            raise ConfigError("min_frequency must be a positive integer")
        # Keep the full 13-slot reserved block so slot arithmetic stays fixed.
        if self.vocab_size < 256 + RESERVED_SLOTS:
            raise ConfigError(
                f"vocab_size must be at least {256 + RESERVED_SLOTS} "
                f"(256 bytes + {RESERVED_SLOTS} reserved special slots), got {self.vocab_size}"
            )

    @property
    def max_merges(self) -> int:
        return self.vocab_size - 256 - RESERVED_SLOTS


def count_pairs(corpus: Iterable[Sequence[int]]) -> dict[Pair, int]:
    """Count every adjacent ordered pair, overlapping occurrences included."""
    counts: Counter = Counter()
    for seq in corpus:
        counts.update(zip(seq, seq[1:]))
    return dict(counts)


def merge_sequence(seq: Sequence[int], pair: Pair, new_id: int) -> list[int]:
    out = []
    a, b = pair
    i, n = 0, len(seq)
    while i < n:
        if i + 1 < n and seq[i] == a and seq[i + 1] == b:
            out.append(new_id)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def apply_merge(corpus: Iterable[Sequence[int]], pair: Pair, new_id: int) -> list[list[int]]:
    """Replace ``pair`` by ``new_id`` left to right, never re-reading an emitted token."""
    return [merge_sequence(seq, pair, new_id) for seq in corpus]


def _flatten(corpus: Sequence[str]) -> np.ndarray:
    parts = []
    for text in corpus:
        data = text.encode("utf-8", errors="surrogatepass")
        if data:
            parts.append(np.frombuffer(data, dtype=np.uint8).astype(np.int32))
            parts.append(np.array([_SEP], dtype=np.int32))
    if not parts:
        return np.zeros(0, dtype=np.int32)
    return np.concatenate(parts[:-1])


def _pair_keys(arr: np.ndarray, starts: np.ndarray, base: int) -> np.ndarray:
    left = arr[starts].astype(np.int64)
    right = arr[starts + 1].astype(np.int64)
    ok = (left >= 0) & (right >= 0)
    return left[ok] * base + right[ok]


def _initial_counts(arr: np.ndarray, base: int) -> dict[int, int]:
    total: Counter = Counter()
    n_pairs = max(arr.size - 1, 0)
    for lo in range(0, n_pairs, _COUNT_CHUNK):
        starts = np.arange(lo, min(lo + _COUNT_CHUNK, n_pairs))
        keys, cnt = np.unique(_pair_keys(arr, starts, base), return_counts=True)
        total.update(dict(zip(keys.tolist(), cnt.tolist())))
    return dict(total)


def _select_sites(arr: np.ndarray, a: int, b: int) -> np.ndarray:
    sites = np.flatnonzero((arr[:-1] == a) & (arr[1:] == b))
    if a == b and sites.size > 1:
        # Runs like "aaaa": keep every other start, left to right.
        idx = np.arange(sites.size)
        run_start = np.r_[True, np.diff(sites) != 1]
        first = np.maximum.accumulate(np.where(run_start, idx, 0))
        sites = sites[(idx - first) % 2 == 0]
    return sites


def _neighbourhood(positions: np.ndarray, offsets: Sequence[int], n_pairs: int) -> np.ndarray:
    cand = np.concatenate([positions + o for o in offsets])
    cand = cand[(cand >= 0) & (cand < n_pairs)]
    return np.unique(cand)


def train(corpus: Sequence[str], config: TrainerConfig) -> tuple[dict[bytes, int], list[MergeRule]]:
    """Learn merges greedily until the vocabulary is full or no pair is frequent enough.

    Among equally frequent pairs the one with the lexicographically smallest
    ``(left bytes, right bytes)`` wins. A pair whose concatenation already exists
    as a token is never selected, which keeps the vocabulary a bijection.
    Special-token slots are reserved and never produced by a merge.

    Returns the forward vocabulary (bytes -> id) and the merges in rank order.
    """
    if not corpus or not any(corpus):
        raise ConfigError("training corpus must contain at least one non-empty string")

    base = config.vocab_size
    arr = _flatten(corpus)
    inverse: list[bytes] = [bytes([i]) for i in range(256)]
    vocab: dict[bytes, int] = {tok: i for i, tok in enumerate(inverse)}
    merges: list[MergeRule] = []

    counts = _initial_counts(arr, base)
    heap = [(-c, inverse[k // base], inverse[k % base], k) for k, c in counts.items()]
    heapq.heapify(heap)

    while len(merges) < config.max_merges and heap:
        neg, left, right, key = heapq.heappop(heap)
        if counts.get(key, 0) != -neg:
            continue
        if -neg < config.min_frequency:
            break
        if left + right in vocab:
            continue

        a, b = divmod(key, base)
        new_id = 256 + len(merges)
        sites = _select_sites(arr, a, b)

        touched: Counter = Counter()
        old_keys = _pair_keys(arr, _neighbourhood(sites, (-1, 0, 1), arr.size - 1), base)
        for k, c in zip(*np.unique(old_keys, return_counts=True)):
            touched[int(k)] -= int(c)

        arr[sites] = new_id
        arr = np.delete(arr, sites + 1)
        new_pos = sites - np.arange(sites.size)
        new_keys = _pair_keys(arr, _neighbourhood(new_pos, (-1, 0), arr.size - 1), base)
        for k, c in zip(*np.unique(new_keys, return_counts=True)):
            touched[int(k)] += int(c)

        merged = left + right
        inverse.append(merged)
        vocab[merged] = new_id
        merges.append(MergeRule(left=left, right=right, result_id=new_id, rank=len(merges)))

        for k, delta in touched.items():
            if delta == 0:
                continue
            c = counts.get(k, 0) + delta
            if c > 0:
                counts[k] = c
                heapq.heappush(heap, (-c, inverse[k // base], inverse[k % base], k))
            else:
                counts.pop(k, None)

    log.info("trained %d merges (vocab %d)", len(merges), len(vocab))
    return vocab, merges
