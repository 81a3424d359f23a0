import numpy as np
import pytest

from desklm.corpus import (Document, FilterConfig, UnigramScorer, candidate_pairs, estimated_jaccard, exact_jaccard,
                           external_verdict, filter_documents, length_filter, minhash_signature, near_dup_clusters,
                           nearest_rank, perplexity_filter, read_documents_dir, shingle_hashes,
                           signature_from_hashes, signatures, write_documents_dir)
from desklm.errors import InputError, ShapeError
from desklm.synth import synthetic_corpus


def _shingles(b: bytes, k=8):
    return {b[i:i + k] for i in range(len(b) - k + 1)}


# length ------------------------------------------------------------------------

def test_length_bounds_inclusive():
    assert length_filter(100) is None
    assert length_filter(10_000) is None
    assert length_filter(99) == "too_short"
    assert length_filter(10_001) == "too_long"


# minhash -----------------------------------------------------------------------

def test_identical_texts_identical_signatures():
    a = minhash_signature("the same text, twice over")
    b = minhash_signature("the same text, twice over")
    np.testing.assert_array_equal(a.values, b.values)
    assert len(a) == 128 and a.shingle_k == 8


def test_shingle_hashes_are_distinct_per_window():
    data = b"abcdefghabcdefgh"
    assert shingle_hashes(data).size == len(_shingles(data))


def test_short_documents_compare_exactly():
    a, b, c = minhash_signature("tiny"), minhash_signature("tiny"), minhash_signature("tine")
    assert a.is_short
    assert estimated_jaccard(a, b) == 1.0 and estimated_jaccard(a, c) == 0.0
    assert estimated_jaccard(a, minhash_signature("long enough to shingle")) == 0.0


def test_disjoint_texts_estimate_near_zero():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = bytes(rng.integers(0, 128, 300).tolist())
        b = bytes(rng.integers(128, 256, 300).tolist())
        assert exact_jaccard(_shingles(a), _shingles(b)) == 0.0
        assert estimated_jaccard(minhash_signature(a), minhash_signature(b)) <= 3 / np.sqrt(128)


def test_estimate_tracks_exact_jaccard():
    rng = np.random.default_rng(1)
    for _ in range(30):
        a = bytearray(rng.integers(97, 123, 400).tolist())
        b = bytearray(a)
        for i in rng.choice(400, 5, replace=False):
            b[i] = 65
        exact = exact_jaccard(_shingles(bytes(a)), _shingles(bytes(b)))
        est = estimated_jaccard(minhash_signature(bytes(a)), minhash_signature(bytes(b)))
        assert abs(est - exact) <= 3 / np.sqrt(128)


def test_signature_seed_controls_values():
    a = minhash_signature("some document text here", seed=1)
    b = minhash_signature("some document text here", seed=2)
    assert not np.array_equal(a.values, b.values)


def test_parallel_signatures_match_sequential():
    texts = synthetic_corpus(20_000, seed=4).splitlines()
    seq = signatures(texts, workers=1)
    par = signatures(texts, workers=4)
    assert all(np.array_equal(x.values, y.values) for x, y in zip(seq, par) if not x.is_short)


# clustering ----------------------------------------------------------------------

def test_exact_duplicates_cluster():
    texts = ["alpha beta gamma delta epsilon", "zeta eta theta iota kappa", "alpha beta gamma delta epsilon"]
    clusters = near_dup_clusters(signatures(texts), ["d0", "d1", "d2"])
    assert clusters == [["d0", "d2"], ["d1"]]


def test_distinct_documents_stay_singletons():
    rng = np.random.default_rng(2)
    sigs = [signature_from_hashes(rng.integers(0, 2**63, 200, dtype=np.uint64)) for _ in range(2000)]
    clusters = near_dup_clusters(sigs)
    assert sum(len(c) > 1 for c in clusters) <= 1


def test_planted_pair_found():
    rng = np.random.default_rng(3)
    base = rng.integers(0, 2**63, 200, dtype=np.uint64)
    a, b = base[:190], base[10:]
    assert exact_jaccard(a.tolist(), b.tolist()) == pytest.approx(0.9)
    others = [signature_from_hashes(rng.integers(0, 2**63, 200, dtype=np.uint64)) for _ in range(10)]
    clusters = near_dup_clusters([signature_from_hashes(a), *others, signature_from_hashes(b)])
    assert ["0", "11"] in clusters


def test_candidate_pairs_rejects_mixed_lengths():
    with pytest.raises(ShapeError):
        candidate_pairs([minhash_signature("x" * 20, num_hashes=64), minhash_signature("y" * 20)])


# perplexity ----------------------------------------------------------------------

def test_nearest_rank():
    assert nearest_rank(range(1, 101), 85) == 85
    assert nearest_rank([5.0], 85) == 5.0
    assert nearest_rank([1, 2, 3, 4], 50) == 2


def test_perplexity_filter_examples():
    cut = perplexity_filter(list(np.linspace(2, 50, 100)), 85)
    assert len(cut.dropped) == 15
    assert cut.dropped == list(range(85, 100))
    assert perplexity_filter([7.0] * 40).dropped == []
    assert perplexity_filter([3.0]).dropped == []
    assert perplexity_filter([]).dropped == []
    assert perplexity_filter([1, 2, 3], threshold=1.5).dropped == [1, 2]


def test_external_verdicts():
    assert external_verdict(None, "a", "t")
    assert not external_verdict({"a": False}, "a", "t")
    assert external_verdict({"a": False}, "b", "t")
    assert not external_verdict(lambda i, t: "bad" not in t, "a", "bad text")


# pipeline ----------------------------------------------------------------------------

@pytest.fixture(scope="module")
def batch(tokenizer):
    rng = np.random.default_rng(5)
    text = synthetic_corpus(300_000, seed=12)
    paras = [l for l in text.splitlines() if len(tokenizer.encode_fast(l)) > 30]
    docs = []
    for i in range(60):
        lines = rng.choice(len(paras), size=int(rng.integers(1, 12)), replace=False)
        docs.append(Document(f"doc{i:03d}", "\n".join(paras[j] for j in lines)))
    docs.append(Document("doc900", docs[3].text))                 # exact duplicate
    docs.append(Document("doc901", docs[7].text + " tail words"))  # near duplicate
    docs.append(Document("doc902", "too short"))
    return docs


def test_pipeline_report_invariants(batch, tokenizer):
    scorer = UnigramScorer(tokenizer, [d.text for d in batch])
    kept, report = filter_documents(batch, tokenizer, scorer, FilterConfig(min_len=100))
    for s in report.stages:
        assert s.kept + s.dropped == s.input
    for prev, nxt in zip(report.stages, report.stages[1:]):
        assert nxt.input == prev.kept
    dedup = report.stages[0]
    assert {"doc900", "doc901"} <= set(dedup.dropped_ids)
    assert report.stages[1].dropped == len(batch) - dedup.dropped - int(0.85 * (len(batch) - dedup.dropped) + 0.999)
    assert "doc902" not in report.kept_ids
    assert [d.id for d in kept] == report.kept_ids
    assert report.to_dict()["seeds"]["minhash"] == FilterConfig().hash_seed


def test_pipeline_is_idempotent_with_pinned_threshold(batch, tokenizer):
    scorer = UnigramScorer(tokenizer, [d.text for d in batch])
    kept, first = filter_documents(batch, tokenizer, scorer, FilterConfig(min_len=100))
    again, second = filter_documents(kept, tokenizer, scorer,
                                     FilterConfig(min_len=100, ppl_threshold=first.ppl_threshold))
    assert [d.id for d in again] == [d.id for d in kept]
    assert all(s.dropped == 0 for s in second.stages)


def test_pipeline_is_deterministic(batch, tokenizer):
    scorer = UnigramScorer(tokenizer, [d.text for d in batch])
    a = filter_documents(batch, tokenizer, scorer)[1].to_json()
    b = filter_documents(batch, tokenizer, scorer)[1].to_json()
    assert a == b


def test_pipeline_plugins_and_errors(batch, tokenizer):
    _, rep = filter_documents(batch, tokenizer, None, FilterConfig(min_len=1),
                              safety={"doc010": False}, language=lambda i, t: i != "doc011")
    stages = {s.name: s for s in rep.stages}
    assert stages["perplexity"].dropped == 0
    assert stages["safety"].dropped_ids == ["doc010"]
    assert stages["language"].dropped_ids == ["doc011"]
    with pytest.raises(InputError):
        filter_documents([Document("a", "x"), Document("a", "y")], tokenizer)


def test_document_directory_io(tmp_path):
    (tmp_path / "one.txt").write_text("first document")
    (tmp_path / "more.jsonl").write_text('{"id": "j1", "text": "second"}\n\n{"id": "j2", "text": "third"}\n')
    docs = read_documents_dir(tmp_path)
    assert [d.id for d in docs] == ["j1", "j2", "one"]
    out = tmp_path / "out"
    write_documents_dir(docs, out)
    assert [d.text for d in read_documents_dir(out)] == ["second", "third", "first document"]
    (tmp_path / "bad.jsonl").write_text("{nope}\n")
    with pytest.raises(InputError):
        read_documents_dir(tmp_path)
