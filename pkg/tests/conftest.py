from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from desklm.model import PROFILES, ModelConfig, init_params  # noqa: E402
from desklm.synth import synthetic_corpus  # noqa: E402
from desklm.tokenizer import Tokenizer, TrainerConfig  # noqa: E402
from helpers import fuzz_strings  # noqa: E402


@pytest.fixture(scope="session")
def corpus_text() -> str:
    return synthetic_corpus(200_000, seed=3)


@pytest.fixture(scope="session")
def corpus_file(tmp_path_factory, corpus_text) -> Path:
    p = tmp_path_factory.mktemp("corpus") / "corpus.txt"
    p.write_text(corpus_text, encoding="utf-8")
    return p


@pytest.fixture(scope="session")
def tokenizer(corpus_text) -> Tokenizer:
    """Trained on synthetic English plus a slice of multibyte fuzz so merges span UTF-8 sequences."""
    docs = corpus_text.splitlines(keepends=True) + fuzz_strings(400, seed=99)
    return Tokenizer.train(docs, TrainerConfig(vocab_size=1024))


@pytest.fixture(scope="session")
def abab_tokenizer() -> Tokenizer:
    return Tokenizer.from_pairs([(b"a", b"b"), (b"ab", b"ab")], vocab_size=512)


@pytest.fixture(scope="session")
def tokenizer_file(tmp_path_factory, tokenizer) -> Path:
    p = tmp_path_factory.mktemp("tok") / "tokenizer.json"
    tokenizer.save(p)
    return p


@pytest.fixture
def tiny_config() -> ModelConfig:
    return ModelConfig(n_layers=2, n_heads=4, n_kv_heads=2, d_model=16, d_ff=24, vocab_size=61, max_seq=32)


@pytest.fixture
def tiny_params(tiny_config):
    # larger init than the default so attention is far from uniform
    params = init_params(tiny_config, seed=7, dtype=np.float64)
    rng = np.random.default_rng(7)
    return params.map(lambda n, a: a if a.ndim == 1 else rng.standard_normal(a.shape) * 0.3)


@pytest.fixture(scope="session")
def desk_tiny() -> ModelConfig:
    return PROFILES["desk-tiny"]


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
