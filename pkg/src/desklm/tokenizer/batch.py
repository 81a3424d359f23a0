"""Order-preserving parallel encoding and encoder throughput measurement."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

from ..errors import ConfigError
from .core import Tokenizer

WORKERS_ENV = "DESKLM_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class BatchRequest:
    texts: Sequence[str]
    workers: int = 1
    with_specials: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _chunks(n: int, workers: int) -> list[range]:
    # A few chunks per worker evens out long documents without splitting any.
    n_chunks = min(n, workers * 4)
    bounds = [round(i * n / n_chunks) for i in range(n_chunks + 1)]
    return [range(bounds[i], bounds[i + 1]) for i in range(n_chunks)]


def batch_encode(tokenizer: Tokenizer, request: BatchRequest) -> list[list[int]]:
    """Encode every text with ``encode_fast``; ``output[i]`` belongs to ``texts[i]``."""
    texts = list(request.texts)
    if not texts:
        return []
    out: list[list[int] | None] = [None] * len(texts)

    def run(idx: range) -> None:
        for i in idx:
            out[i] = tokenizer.encode_fast(texts[i], request.with_specials)

    if request.workers == 1:
        run(range(len(texts)))
    else:
        with ThreadPoolExecutor(max_workers=request.workers) as pool:
            for fut in [pool.submit(run, c) for c in _chunks(len(texts), request.workers)]:
                fut.result()
    return out  # type: ignore[return-value]


@dataclass(frozen=True)
class ThroughputReport:
    total_tokens: int
    wall_seconds: float
    tokens_per_second: float
    workers: int
    documents: int = 0
    io_seconds: float = 0.0
    tokens_per_second_with_io: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def read_documents(path: str | os.PathLike) -> list[str]:
    """One document per line, line terminators kept so the text is reproduced exactly."""
    return Path(path).read_text(encoding="utf-8").splitlines(keepends=True)


def _rate(tokens: int, seconds: float) -> float:
    return tokens / seconds if tokens and seconds > 0 else 0.0


def throughput_bench(tokenizer: Tokenizer, corpus_path, workers: int = 1) -> ThroughputReport:
    t0 = time.perf_counter()
    docs = read_documents(corpus_path)
    t1 = time.perf_counter()
    encoded = batch_encode(tokenizer, BatchRequest(docs, workers))
    t2 = time.perf_counter()
    total = sum(map(len, encoded))
    wall = t2 - t1 if total else 0.0
    return ThroughputReport(
        total_tokens=total,
        wall_seconds=wall,
        tokens_per_second=_rate(total, wall),
        workers=workers,
        documents=len(docs),
        io_seconds=t1 - t0,
        tokens_per_second_with_io=_rate(total, t2 - t0),
    )
