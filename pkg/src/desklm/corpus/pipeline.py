"""Dedup, perplexity, safety, length and language stages composed into one report."""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..errors import InputError
from ..tokenizer.core import Tokenizer
from .filters import Scorer, Verdicts, external_verdict, length_filter, perplexity, perplexity_filter
from .minhash import DEFAULT_SEED, near_dup_clusters, signatures

REPORT_VERSION = 1


@dataclass
class Document:
    id: str
    text: str
    _token_len: int | None = field(default=None, repr=False, compare=False)

    def token_len(self, tokenizer: Tokenizer) -> int:
        if self._token_len is None:
            self._token_len = len(tokenizer.encode_fast(self.text))
        return self._token_len


@dataclass
class StageReport:
    name: str
    input: int
    kept: int
    dropped: int
    reasons: dict[str, int]
    dropped_ids: list[str]

    def to_dict(self) -> dict:
        return {"name": self.name, "input": self.input, "kept": self.kept, "dropped": self.dropped,
                "reasons": dict(sorted(self.reasons.items())), "dropped_ids": self.dropped_ids}


@dataclass(frozen=True)
class FilterConfig:
    min_len: int = 100
    max_len: int = 10_000
    dedup_threshold: float = 0.8
    num_hashes: int = 128
    shingle_k: int = 8
    bands: int = 16
    ppl_percentile: float = 85.0
    ppl_threshold: float | None = None
    hash_seed: int = DEFAULT_SEED
    workers: int = 1


@dataclass
class FilterReport:
    config: FilterConfig
    stages: list[StageReport]
    ppl_threshold: float | None
    kept_ids: list[str]

    @property
    def input_count(self) -> int:
        return self.stages[0].input if self.stages else 0

    def to_dict(self) -> dict:
        c = self.config
        return {
            "format_version": REPORT_VERSION,
            "input": self.input_count,
            "output": len(self.kept_ids),
            "stages": [s.to_dict() for s in self.stages],
            "seeds": {"minhash": c.hash_seed},
            "ppl_threshold": self.ppl_threshold,
            "parameters": {"min_len": c.min_len, "max_len": c.max_len, "dedup_threshold": c.dedup_threshold,
                           "num_hashes": c.num_hashes, "shingle_k": c.shingle_k, "bands": c.bands,
                           "ppl_percentile": c.ppl_percentile},
            "kept_ids": self.kept_ids,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _stage(name: str, docs: list[Document], drops: dict[str, str]) -> tuple[list[Document], StageReport]:
    kept = [d for d in docs if d.id not in drops]
    ids = [d.id for d in docs if d.id in drops]
    report = StageReport(name, len(docs), len(kept), len(ids), dict(Counter(drops.values())), ids)
    return kept, report


def filter_documents(docs: Sequence[Document], tokenizer: Tokenizer, scorer: Scorer | None = None,
                     config: FilterConfig = FilterConfig(), safety: Verdicts | None = None,
                     language: Verdicts | None = None) -> tuple[list[Document], FilterReport]:
    """Run every stage in order; without a scorer the perplexity stage passes everything through."""
    seen = set()
    for d in docs:
        if d.id in seen:
            raise InputError(f"duplicate document id {d.id!r}")
        seen.add(d.id)
    current = list(docs)
    stages = []

    sigs = signatures([d.text for d in current], config.num_hashes, config.shingle_k, config.hash_seed, config.workers)
    clusters = near_dup_clusters(sigs, [d.id for d in current], config.dedup_threshold, config.bands)
    drops = {i: "near_duplicate" for c in clusters for i in c[1:]}
    current, rep = _stage("dedup", current, drops)
    stages.append(rep)

    threshold = config.ppl_threshold
    drops = {}
    if scorer is not None:
        cut = perplexity_filter([perplexity(scorer, d.text) for d in current], config.ppl_percentile, threshold)
        threshold = cut.threshold
        drops = {current[i].id: "perplexity" for i in cut.dropped}
    current, rep = _stage("perplexity", current, drops)
    stages.append(rep)

    drops = {d.id: "unsafe" for d in current if not external_verdict(safety, d.id, d.text)}
    current, rep = _stage("safety", current, drops)
    stages.append(rep)

    drops = {}
    for d in current:
        reason = length_filter(d.token_len(tokenizer), config.min_len, config.max_len)
        if reason:
            drops[d.id] = reason
    current, rep = _stage("length", current, drops)
    stages.append(rep)

    drops = {d.id: "language" for d in current if not external_verdict(language, d.id, d.text)}
    current, rep = _stage("language", current, drops)
    stages.append(rep)

    return current, FilterReport(config, stages, threshold, [d.id for d in current])


def read_documents_dir(path: str | os.PathLike) -> list[Document]:
    """Each ``*.txt`` file is one document (id = file stem); ``*.jsonl`` files hold ``{"id", "text"}`` records."""
    root = Path(path)
    if not root.is_dir():
        raise InputError(f"{root} is not a directory")
    docs = []
    for p in sorted(root.iterdir()):
        if p.suffix == ".txt":
            docs.append(Document(p.stem, p.read_text(encoding="utf-8")))
        elif p.suffix == ".jsonl":
            for n, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    docs.append(Document(str(rec["id"]), rec["text"]))
                except (ValueError, KeyError, TypeError) as exc:
                    raise InputError(f"{p}:{n}: bad record ({exc})") from exc
    return docs


def write_documents_dir(docs: Sequence[Document], path: str | os.PathLike) -> None:
    """Kept documents as a single ``kept.jsonl``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "kept.jsonl", "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(json.dumps({"id": d.id, "text": d.text}, ensure_ascii=False) + "\n")
