"""MinHash signatures over byte shingles and LSH-banded near-duplicate clustering."""

from __future__ import annotations

import hashlib
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError, ShapeError

DEFAULT_SEED = 0x5EED_0F_D0C5
_MASK32 = np.uint64(0xFFFFFFFF)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@dataclass(frozen=True)
class HashFamily:
    """``h_i(x) = (a_i * x + b_i mod 2**64) >> 32`` with odd ``a_i``, drawn from ``seed``."""

    num_hashes: int = 128
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.num_hashes < 1:
            raise ConfigError("num_hashes must be positive")

    @property
    def coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        a = rng.integers(0, 2**63, size=self.num_hashes, dtype=np.uint64) * np.uint64(2) + np.uint64(1)
        b = rng.integers(0, 2**63, size=self.num_hashes, dtype=np.uint64)
        return a, b


@dataclass(frozen=True)
class MinHashSignature:
    """Per-hash minima, or for texts shorter than one shingle a digest compared exactly."""

    values: np.ndarray | None
    shingle_k: int
    digest: str | None = None

    @property
    def is_short(self) -> bool:
        return self.values is None

    def __len__(self) -> int:
        return 0 if self.values is None else self.values.size


def shingle_hashes(data: bytes, k: int = 8) -> np.ndarray:
    """Distinct 64-bit hashes of every ``k``-byte window of ``data``."""
    if k < 1:
        raise ConfigError("shingle_k must be positive")
    n = len(data) - k + 1
    if n <= 0:
        return np.empty(0, dtype=np.uint64)
    buf = np.frombuffer(data, dtype=np.uint8).astype(np.uint64)
    h = np.zeros(n, dtype=np.uint64)
    prime = np.uint64(0x100000001B3)
    with np.errstate(over="ignore"):
        for j in range(k):
            h = (h ^ buf[j:j + n]) * prime
        return np.unique(_splitmix64(h))


def signature_from_hashes(hashes: np.ndarray, family: HashFamily = HashFamily(), shingle_k: int = 8) -> MinHashSignature:
    """MinHash of an arbitrary set of 64-bit element hashes."""
    a, b = family.coefficients
    hashes = np.asarray(hashes, dtype=np.uint64)
    if hashes.size == 0:
        raise ShapeError("cannot take a MinHash of an empty set")
    values = np.empty(family.num_hashes, dtype=np.uint64)
    with np.errstate(over="ignore"):
        # chunked to bound the [n, num_hashes] temporary
        step = max(1, (1 << 20) // family.num_hashes)
        values[:] = np.iinfo(np.uint64).max
        for i in range(0, hashes.size, step):
            block = (hashes[i:i + step, None] * a[None, :] + b[None, :]) >> np.uint64(32)
            np.minimum(values, block.min(axis=0), out=values)
    return MinHashSignature(values, shingle_k)


def minhash_signature(text: str | bytes, num_hashes: int = 128, shingle_k: int = 8,
                      seed: int = DEFAULT_SEED) -> MinHashSignature:
    data = text.encode("utf-8", errors="surrogatepass") if isinstance(text, str) else bytes(text)
    hashes = shingle_hashes(data, shingle_k)
    if hashes.size == 0:
        return MinHashSignature(None, shingle_k, hashlib.blake2b(data, digest_size=16).hexdigest())
    return signature_from_hashes(hashes, HashFamily(num_hashes, seed), shingle_k)


def signatures(texts: Sequence[str | bytes], num_hashes: int = 128, shingle_k: int = 8,
               seed: int = DEFAULT_SEED, workers: int = 1) -> list[MinHashSignature]:
    if workers <= 1:
        return [minhash_signature(t, num_hashes, shingle_k, seed) for t in texts]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: minhash_signature(t, num_hashes, shingle_k, seed), texts))


def estimated_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    if a.is_short or b.is_short:
        return 1.0 if a.digest is not None and a.digest == b.digest else 0.0
    if a.values.shape != b.values.shape:
        raise ShapeError("signatures differ in length")
    return float(np.mean(a.values == b.values))


def exact_jaccard(a: Iterable, b: Iterable) -> float:
    sa, sb = set(a), set(b)
    union = sa | sb
    return len(sa & sb) / len(union) if union else 1.0


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def candidate_pairs(sigs: Sequence[MinHashSignature], bands: int = 16) -> set[tuple[int, int]]:
    """Index pairs sharing at least one identical band (or the same short-text digest)."""
    lengths = {len(s) for s in sigs if not s.is_short}
    if len(lengths) > 1:
        raise ShapeError(f"signatures must share one length, got {sorted(lengths)}")
    buckets: dict[tuple, list[int]] = defaultdict(list)
    for i, s in enumerate(sigs):
        if s.is_short:
            buckets[("short", s.digest)].append(i)
            continue
        if s.values.size % bands:
            raise ConfigError(f"{s.values.size} hashes do not split into {bands} bands")
        for band, chunk in enumerate(s.values.reshape(bands, -1)):
            buckets[(band, chunk.tobytes())].append(i)
    pairs = set()
    for members in buckets.values():
        for x in range(1, len(members)):
            for y in range(x):
                pairs.add((members[y], members[x]))
    return pairs


def near_dup_clusters(sigs: Sequence[MinHashSignature], ids: Sequence[str] | None = None,
                      threshold: float = 0.8, bands: int = 16) -> list[list[str]]:
    """Clusters of ids whose signatures agree on at least ``threshold`` of positions.

    Each cluster is sorted with its representative (lowest id) first; clusters
    are ordered by representative.
    """
    ids = list(ids) if ids is not None else [str(i) for i in range(len(sigs))]
    if len(ids) != len(sigs):
        raise ShapeError("ids and signatures differ in length")
    uf = _UnionFind(len(sigs))
    for i, j in sorted(candidate_pairs(sigs, bands)):
        if estimated_jaccard(sigs[i], sigs[j]) >= threshold:
            uf.union(i, j)
    groups: dict[int, list[str]] = defaultdict(list)
    for i in range(len(sigs)):
        groups[uf.find(i)].append(ids[i])
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])
