"""The trained tokenizer: reference and fast encoders, decoder, persistence."""

from __future__ import annotations

import base64
import heapq
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..errors import DecodeError, FormatError
from .bpe import MergeRule, TrainerConfig, train
from .specials import DEFAULT_SPECIAL_TOKENS, SpecialTokenTable
from .trie import Trie, build_trie

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Vocab:
    forward: dict[bytes, int]
    inverse: dict[int, bytes]

    @classmethod
    def from_merges(cls, merges: Sequence[MergeRule]) -> "Vocab":
        forward = {bytes([i]): i for i in range(256)}
        for m in merges:
            forward[m.result] = m.result_id
        return cls(forward, {i: b for b, i in forward.items()})

    def __len__(self) -> int:
        return len(self.forward)


def _to_bytes(text: str) -> bytes:
    return text.encode("utf-8", errors="surrogatepass")


@dataclass(frozen=True, eq=False)
class Tokenizer:
    """Immutable trained tokenizer.

    Ids 0-255 are the raw bytes, 256.. are merges in rank order, and the 13
    reserved special slots occupy the top of ``[0, vocab_size)``. Use
    :meth:`public_ids` to present special tokens under the public 0-12
    numbering.
    """

    vocab_size: int
    merges: tuple[MergeRule, ...]
    min_frequency: int = 2
    special_tokens: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_SPECIAL_TOKENS))

    def __post_init__(self):
        specials = SpecialTokenTable(self.vocab_size, dict(self.special_tokens))
        vocab = Vocab.from_merges(self.merges)
        ranks = {}
        for m in self.merges:
            ranks[(vocab.forward[m.left], vocab.forward[m.right])] = m.rank
        special_trie = Trie()
        for literal, internal in specials.literals_by_internal().items():
            special_trie.insert(literal, internal)
        object.__setattr__(self, "specials", specials)
        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "pair_ranks", ranks)
        object.__setattr__(self, "trie", build_trie(vocab.forward, self.merges))
        object.__setattr__(self, "special_trie", special_trie)

    # construction -----------------------------------------------------------

    @classmethod
    def train(cls, corpus: Sequence[str], config: TrainerConfig | None = None) -> "Tokenizer":
        config = config or TrainerConfig()
        _, merges = train(corpus, config)
        return cls(config.vocab_size, tuple(merges), config.min_frequency)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[bytes, bytes]], vocab_size: int, min_frequency: int = 2) -> "Tokenizer":
        """Build from an ordered list of ``(left bytes, right bytes)`` merges."""
        known = {bytes([i]) for i in range(256)}
        seen_pairs = set()
        merges = []
        for rank, (left, right) in enumerate(pairs):
            left, right = bytes(left), bytes(right)
            if (left, right) in seen_pairs:
                raise FormatError(f"merge {rank} repeats an earlier merge rank for {left!r}+{right!r}")
            if left not in known or right not in known:
                raise FormatError(f"merge {rank} references a token that does not exist yet")
            if left + right in known:
                raise FormatError(f"merge {rank} duplicates existing token {left + right!r}")
            seen_pairs.add((left, right))
            known.add(left + right)
            merges.append(MergeRule(left, right, 256 + rank, rank))
        if 256 + len(merges) > SpecialTokenTable(vocab_size).base:
            raise FormatError("merges overflow into the reserved special-token slots")
        return cls(vocab_size, tuple(merges), min_frequency)

    # encoding ---------------------------------------------------------------

    def _segments(self, data: bytes, with_specials: bool, fast: bool):
        """Yield ``(bytes_chunk, None)`` or ``(b"", special_id)`` in order."""
        if not with_specials:
            if data:
                yield data, None
            return
        literals = self.specials.literals_by_internal()
        start = i = 0
        n = len(data)
        while i < n:
            if fast:
                hit = self.special_trie.longest_match(data, i)
            else:
                hit = None
                for lit, sid in literals.items():
                    if data.startswith(lit, i) and (hit is None or len(lit) > hit[1]):
                        hit = (sid, len(lit))
            if hit is None:
                i += 1
                continue
            if start < i:
                yield data[start:i], None
            yield b"", hit[0]
            i += hit[1]
            start = i
        if start < n:
            yield data[start:], None

    def _merge_reference(self, chunk: bytes) -> list[int]:
        ids = list(chunk)
        present = set(zip(ids, ids[1:]))
        for m in self.merges:
            if not present:
                break
            pair = (self.vocab.forward[m.left], self.vocab.forward[m.right])
            if pair in present:
                out = []
                i, n = 0, len(ids)
                while i < n:
                    if i + 1 < n and ids[i] == pair[0] and ids[i + 1] == pair[1]:
                        out.append(m.result_id)
                        i += 2
                    else:
                        out.append(ids[i])
                        i += 1
                ids = out
                present = set(zip(ids, ids[1:]))
        return ids

    def _merge_fast(self, chunk: bytes) -> list[int]:
        # Linked list over byte positions plus a heap keyed by (rank, position).
        # Merging rank r only creates pairs of rank > r, so popping in heap order
        # replays the rank-ordered passes exactly.
        ids: list[int] = list(chunk)
        n = len(ids)
        if n < 2:
            return ids
        ranks = self.pair_ranks
        nxt = list(range(1, n + 1))
        nxt[-1] = -1
        prv = list(range(-1, n - 1))
        alive = [True] * n
        heap = []
        for i in range(n - 1):
            r = ranks.get((ids[i], ids[i + 1]))
            if r is not None:
                heap.append((r, i))
        heapq.heapify(heap)
        while heap:
            r, i = heapq.heappop(heap)
            if not alive[i]:
                continue
            j = nxt[i]
            if j < 0 or ranks.get((ids[i], ids[j])) != r:
                continue
            ids[i] = 256 + r
            alive[j] = False
            k = nxt[j]
            nxt[i] = k
            if k >= 0:
                prv[k] = i
                rk = ranks.get((ids[i], ids[k]))
                if rk is not None:
                    heapq.heappush(heap, (rk, i))
            p = prv[i]
            if p >= 0:
                rp = ranks.get((ids[p], ids[i]))
                if rp is not None:
                    heapq.heappush(heap, (rp, p))
        out = []
        i = 0
        while i >= 0:
            out.append(ids[i])
            i = nxt[i]
        return out

    def encode_bytes(self, data: bytes, with_specials: bool = False, fast: bool = True) -> list[int]:
        merge = self._merge_fast if fast else self._merge_reference
        out: list[int] = []
        for chunk, special in self._segments(data, with_specials, fast):
            if special is not None:
                out.append(special)
            else:
                out.extend(merge(chunk))
        return out

    def encode(self, text: str, with_specials: bool = False) -> list[int]:
        """Reference encoder: every merge applied over the whole input in rank order."""
        return self.encode_bytes(_to_bytes(text), with_specials, fast=False)

    def encode_fast(self, text: str, with_specials: bool = False) -> list[int]:
        """Same ids as :meth:`encode`, computed with a rank-priority queue."""
        return self.encode_bytes(_to_bytes(text), with_specials, fast=True)

    # decoding ---------------------------------------------------------------

    def decode_bytes(self, ids: Iterable[int]) -> bytes:
        parts = []
        inverse = self.vocab.inverse
        for pos, tid in enumerate(ids):
            piece = inverse.get(tid)
            if piece is None:
                piece = self.specials.literal_bytes(tid)
                if piece is None:
                    raise DecodeError(f"unknown token id {tid} at position {pos}", position=pos)
            parts.append(piece)
        return b"".join(parts)

    def decode(self, ids: Iterable[int]) -> str:
        return self.decode_bytes(ids).decode("utf-8", errors="replace")

    def public_ids(self, ids: Iterable[int]) -> list[int]:
        return [self.specials.to_public(i) for i in ids]

    def token_bytes(self, token_id: int) -> bytes:
        return self.decode_bytes([token_id])

    @property
    def n_tokens(self) -> int:
        """Number of ids actually in use (bytes + merges + specials)."""
        return len(self.vocab) + len(self.special_tokens)

    # persistence ------------------------------------------------------------

    def to_json(self) -> dict:
        b64 = lambda b: base64.b64encode(b).decode("ascii")
        return {
            "format_version": FORMAT_VERSION,
            "vocab_size": self.vocab_size,
            "min_frequency": self.min_frequency,
            "merges": [[b64(m.left), b64(m.right)] for m in self.merges],
            "special_tokens": dict(self.special_tokens),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Tokenizer":
        if not isinstance(doc, dict):
            raise FormatError("tokenizer file must hold a JSON object")
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported tokenizer format_version {version!r} (expected {FORMAT_VERSION})")
        try:
            vocab_size = int(doc["vocab_size"])
            min_frequency = int(doc.get("min_frequency", 2))
            pairs = [(base64.b64decode(l, validate=True), base64.b64decode(r, validate=True))
                     for l, r in doc["merges"]]
            specials = {str(k): int(v) for k, v in doc.get("special_tokens", DEFAULT_SPECIAL_TOKENS).items()}
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed tokenizer file (format_version {version}): {exc}") from exc
        tok = cls.from_pairs(pairs, vocab_size, min_frequency)
        return cls(vocab_size, tok.merges, min_frequency, specials)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Tokenizer":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"tokenizer file is not valid JSON: {exc}") from exc
        return cls.from_json(doc)


def encode(tokenizer: Tokenizer, text: str, with_specials: bool = False) -> list[int]:
    return tokenizer.encode(text, with_specials)


def encode_fast(tokenizer: Tokenizer, text: str, with_specials: bool = False) -> list[int]:
    return tokenizer.encode_fast(text, with_specials)


def decode(tokenizer: Tokenizer, ids: Iterable[int]) -> str:
    return tokenizer.decode(ids)


def save(tokenizer: Tokenizer, path) -> None:
    tokenizer.save(path)


def load(path) -> Tokenizer:
    return Tokenizer.load(path)
