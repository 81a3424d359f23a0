import pytest

from desklm.errors import ConfigError, InputError
from desklm.metrics import compression_of_text, compression_ratio, effective_context
from desklm.synth import synthetic_corpus
from desklm.tokenizer import Tokenizer


@pytest.fixture(scope="module")
def four_char_tokenizer():
    return Tokenizer.from_pairs([(b"a", b"b"), (b"c", b"d"), (b"ab", b"cd")], vocab_size=512)


def test_whole_word_tokens_give_word_length(four_char_tokenizer):
    r = compression_of_text(four_char_tokenizer, "abcd" * 50)
    assert (r.corpus_chars, r.corpus_tokens, r.chars_per_token) == (200, 50, 4.0)


def test_no_merges_on_ascii_is_one():
    t = Tokenizer.from_pairs([], vocab_size=300)
    assert compression_of_text(t, "plain ascii text\n").chars_per_token == 1.0


def test_chars_are_code_points_not_bytes():
    t = Tokenizer.from_pairs([], vocab_size=300)
    r = compression_of_text(t, "é")
    assert (r.corpus_chars, r.corpus_tokens) == (1, 2)


def test_ratio_recomputes_from_counts(tokenizer, corpus_file):
    r = compression_ratio(tokenizer, corpus_file)
    assert r.chars_per_token == r.corpus_chars / r.corpus_tokens
    assert r.chars_per_token > 2.0


def test_held_in_compresses_at_least_as_well(tokenizer, corpus_text):
    held_in = compression_of_text(tokenizer, corpus_text[:50_000]).chars_per_token
    held_out = compression_of_text(tokenizer, synthetic_corpus(50_000, seed=3, lexicon_seed=77)).chars_per_token
    assert held_in >= held_out


def test_compression_errors(tokenizer, tmp_path):
    with pytest.raises(InputError):
        compression_of_text(tokenizer, "")
    with pytest.raises(InputError):
        compression_ratio(tokenizer, tmp_path / "missing.txt")


def test_effective_context():
    assert effective_context(2048, 4.78) == 9789.44
    assert effective_context(2048, 4.44) == 9093.12
    assert effective_context(2048, 1.0) == 2048.0
    for bad in [(0, 4.0), (2048, 0), (-1, 1.0)]:
        with pytest.raises(ConfigError):
            effective_context(*bad)
