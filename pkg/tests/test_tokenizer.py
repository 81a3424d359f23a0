import base64
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from desklm.errors import ConfigError, DecodeError, FormatError
from desklm.tokenizer import (RESERVED_SLOTS, Tokenizer, TrainerConfig, apply_merge, build_trie, count_pairs, decode,
                              encode, encode_fast, load, save, train)
from helpers import fuzz_strings


# pair counting and merging ---------------------------------------------------

def test_count_pairs_hand_counts():
    assert count_pairs([[97, 98, 97, 98]]) == {(97, 98): 2, (98, 97): 1}
    assert count_pairs([[97]]) == {}
    assert count_pairs([[97, 97, 97]]) == {(97, 97): 2}
    assert count_pairs([]) == {}


def test_apply_merge_left_to_right():
    assert apply_merge([[97, 98, 97, 98]], (97, 98), 256) == [[256, 256]]
    assert apply_merge([[97, 97, 97]], (97, 97), 256) == [[256, 97]]
    assert apply_merge([[98]], (97, 97), 256) == [[98]]
    assert apply_merge([[97, 97, 97, 97]], (97, 97), 256) == [[256, 256]]


# training --------------------------------------------------------------------

def _pairs(merges):
    return [(m.left, m.right) for m in merges]


def test_train_abab_oracle():
    vocab, merges = train(["abab", "abab"], TrainerConfig(vocab_size=1000, min_frequency=2))
    assert _pairs(merges) == [(b"a", b"b"), (b"ab", b"ab")]
    assert [m.result_id for m in merges] == [256, 257]
    assert vocab[b"abab"] == 257


def test_train_threshold_unreachable():
    _, merges = train(["xy"], TrainerConfig(vocab_size=1000, min_frequency=2))
    assert merges == []


def test_train_aaa_trace():
    _, merges = train(["aaa", "aaa"], TrainerConfig(vocab_size=1000, min_frequency=2))
    assert _pairs(merges)[:2] == [(b"a", b"a"), (b"aa", b"a")]


def test_train_tie_break_is_lexicographic():
    # (b"c", b"d") and (b"a", b"b") both occur twice; the smaller byte pair wins
    _, merges = train(["cdab", "cdab"], TrainerConfig(vocab_size=1000, min_frequency=2))
    assert _pairs(merges)[0] == (b"a", b"b")


def test_train_respects_vocab_budget():
    cfg = TrainerConfig(vocab_size=256 + RESERVED_SLOTS + 3, min_frequency=1)
    _, merges = train(["the quick brown fox jumps over the lazy dog"] * 3, cfg)
    assert len(merges) == 3


@pytest.mark.parametrize("bad", [dict(vocab_size=100), dict(vocab_size=1000, min_frequency=0)])
def test_trainer_config_rejects(bad):
    with pytest.raises(ConfigError):
        TrainerConfig(**bad)


def test_train_is_deterministic(corpus_text):
    docs = corpus_text.splitlines(keepends=True)[:300]
    a = train(docs, TrainerConfig(vocab_size=700))
    b = train(docs, TrainerConfig(vocab_size=700))
    assert a == b


def test_merges_are_concatenations_of_existing_parents(tokenizer):
    known = {bytes([i]) for i in range(256)}
    for m in tokenizer.merges:
        assert m.left in known and m.right in known
        assert m.result == m.left + m.right
        known.add(m.result)


def test_vocab_is_a_bijection(tokenizer):
    v = tokenizer.vocab
    assert len(v.forward) == len(v.inverse)
    assert all(v.inverse[i] == b for b, i in v.forward.items())
    assert all(v.forward[b] == i for i, b in v.inverse.items())


def test_merge_ids_never_reach_special_slots(tokenizer):
    top = max(m.result_id for m in tokenizer.merges)
    assert top < tokenizer.specials.base


# encoding --------------------------------------------------------------------

def test_abab_encode_decode(abab_tokenizer):
    t = abab_tokenizer
    assert encode(t, "abab") == [257]
    assert encode_fast(t, "abab") == [257]
    assert encode(t, "") == []
    assert decode(t, [257]) == "abab"
    assert decode(t, []) == ""
    assert decode(t, [255]) == "�"


def test_specials_use_public_table_ids(abab_tokenizer):
    t = abab_tokenizer
    ids = t.encode("<|user|>A", with_specials=True)
    assert t.public_ids(ids) == [9, 65]
    assert ids == t.encode_fast("<|user|>A", with_specials=True)
    assert t.decode(ids) == "<|user|>A"
    # without specials the literal is ordinary text
    assert t.public_ids(t.encode("<|user|>A")) == list(b"<|user|>A")


def test_special_longest_match():
    t = Tokenizer(vocab_size=300, merges=(), special_tokens={"<a>": 0, "<a><b>": 1})
    ids = t.encode("<a><b><a>", with_specials=True)
    assert t.public_ids(ids) == [1, 0]


def test_decode_unknown_id_reports_position(abab_tokenizer):
    with pytest.raises(DecodeError) as err:
        abab_tokenizer.decode([97, 400, 98])
    assert err.value.position == 1


def test_encode_handles_lone_surrogates(abab_tokenizer):
    s = "a\ud800b"
    assert abab_tokenizer.decode_bytes(abab_tokenizer.encode(s)) == s.encode("utf-8", "surrogatepass")


def test_round_trip_fuzz(tokenizer):
    for s in fuzz_strings(500, seed=5):
        assert tokenizer.decode(tokenizer.encode_fast(s)) == s
        assert tokenizer.decode(tokenizer.encode_fast(s, with_specials=True)) == s


def test_encoders_agree_on_fuzz_and_corpus(tokenizer, corpus_text):
    texts = fuzz_strings(300, seed=11) + corpus_text.splitlines(keepends=True)[:100]
    for s in texts:
        assert tokenizer.encode_fast(s) == tokenizer.encode(s)
        assert tokenizer.encode_fast(s, True) == tokenizer.encode(s, True)


@settings(max_examples=200, deadline=None)
@given(st.binary(max_size=64))
def test_encoders_agree_on_random_bytes(tokenizer, data):
    fast = tokenizer.encode_bytes(data, fast=True)
    assert fast == tokenizer.encode_bytes(data, fast=False)
    assert tokenizer.decode_bytes(fast) == data


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=60))
def test_token_count_never_exceeds_bytes(tokenizer, s):
    ids = tokenizer.encode(s)
    assert len(ids) <= len(s.encode("utf-8", "surrogatepass"))
    assert tokenizer.decode_bytes(ids) == s.encode("utf-8", "surrogatepass")


# trie ---------------------------------------------------------------------------

def test_trie_longest_match(abab_tokenizer):
    trie = abab_tokenizer.trie
    assert trie.longest_match(b"abac", 0) == (256, 2)
    assert trie.longest_match(b"zq", 0) == (ord("z"), 1)
    assert trie.longest_match(b"abab", 0) == (257, 4)
    assert trie.longest_match(b"", 0) is None


def test_build_trie_covers_vocab(tokenizer):
    trie = build_trie(tokenizer.vocab.forward, tokenizer.merges)
    assert len(trie) == len(tokenizer.vocab.forward)
    for b, i in list(tokenizer.vocab.forward.items())[::37]:
        assert trie.get(b)[0] == i


# persistence --------------------------------------------------------------------

def test_save_load_round_trip(tmp_path, tokenizer):
    path = tmp_path / "t.json"
    save(tokenizer, path)
    again = load(path)
    assert again.merges == tokenizer.merges
    for s in fuzz_strings(200, seed=2):
        assert again.encode_fast(s, True) == tokenizer.encode_fast(s, True)


def test_file_layout(tmp_path, abab_tokenizer):
    path = tmp_path / "t.json"
    abab_tokenizer.save(path)
    doc = json.loads(path.read_text())
    assert doc["format_version"] == 1
    assert doc["vocab_size"] == 512
    assert [[base64.b64decode(x) for x in pair] for pair in doc["merges"]] == [[b"a", b"b"], [b"ab", b"ab"]]
    assert doc["special_tokens"]["<|user|>"] == 9


def _doc(tokenizer):
    return tokenizer.to_json()


def test_load_rejects_unknown_version(tmp_path, abab_tokenizer):
    doc = _doc(abab_tokenizer)
    doc["format_version"] = 99
    with pytest.raises(FormatError):
        Tokenizer.from_json(doc)


def test_load_rejects_duplicate_merge(abab_tokenizer):
    doc = _doc(abab_tokenizer)
    doc["merges"].append(doc["merges"][0])
    with pytest.raises(FormatError):
        Tokenizer.from_json(doc)


@pytest.mark.parametrize("text", ["{", "[]", '{"format_version": 1}'])
def test_load_rejects_malformed(tmp_path, text):
    p = tmp_path / "bad.json"
    p.write_text(text)
    with pytest.raises(FormatError):
        load(p)
