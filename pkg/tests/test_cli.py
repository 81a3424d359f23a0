"""End-to-end runs of the installed console scripts."""

import csv
import json
import subprocess
import sys

import pytest

from desklm.cli import main


def run(*argv, ok=True):
    proc = subprocess.run(list(argv), capture_output=True, text=True, timeout=300)
    if ok:
        assert proc.returncode == 0, proc.stderr
    return proc


def js(*argv):
    return json.loads(run(*argv, "--format", "json").stdout)


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    out = d / "corpus.txt"
    js("desklm", "data", "synth", "--bytes", "60000", "--seed", "2", "--out", str(out))
    return out


@pytest.fixture(scope="module")
def tok_file(small_corpus):
    path = small_corpus.parent / "tok.json"
    doc = js("tok", "train", "--corpus", str(small_corpus), "--vocab-size", "400", "--out", str(path))
    assert doc["vocab_size"] == 400 and doc["merges"] > 0
    return path


def test_synth_is_seeded(tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    run("desklm", "data", "synth", "--bytes", "5000", "--seed", "9", "--out", str(a))
    run("desklm", "data", "synth", "--bytes", "5000", "--seed", "9", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_encode_decode_round_trip(tok_file):
    ids = js("tok", "encode", "--tokenizer", str(tok_file), "--text", "héllo wörld <s>", "--specials")["ids"]
    text = run("tok", "decode", "--tokenizer", str(tok_file), "--ids", ",".join(map(str, ids))).stdout
    assert text.rstrip("\n") == "héllo wörld <s>"


def test_encode_abab(tmp_path):
    from desklm.tokenizer import Tokenizer
    p = tmp_path / "t.json"
    Tokenizer.from_pairs([(b"a", b"b"), (b"ab", b"ab")], vocab_size=512).save(p)
    assert run("tok", "encode", "--tokenizer", str(p), "--text", "abab").stdout.split() == ["257"]
    pub = run("tok", "encode", "--tokenizer", str(p), "--text", "<|user|>A", "--specials", "--public-ids").stdout
    assert pub.split() == ["9", "65"]


def test_encode_from_file(tok_file, tmp_path):
    f = tmp_path / "in.txt"
    f.write_text("from a file")
    assert js("tok", "encode", "--tokenizer", str(tok_file), "--file", str(f))["count"] > 0


def test_bench_and_compress(tok_file, small_corpus):
    bench = js("tok", "bench", "--tokenizer", str(tok_file), "--corpus", str(small_corpus), "--workers", "2")
    assert bench["total_tokens"] > 0 and bench["workers"] == 2
    comp = js("tok", "compress", "--tokenizer", str(tok_file), "--corpus", str(small_corpus), "--context", "2048")
    assert comp["chars_per_token"] == comp["corpus_chars"] / comp["corpus_tokens"]
    assert comp["effective_context_chars"] == round(2048 * comp["chars_per_token"], 2)


def test_describe():
    doc = js("model", "describe", "--config", "base")
    assert doc["params"]["embedding"] == 196_608_000
    assert set(doc["formulas"]) >= {"embedding", "attention", "ffn"}
    assert "embedding" in run("model", "describe", "--config", "desk-tiny").stdout


def test_mem_json_schema_and_figure(tmp_path):
    out = tmp_path / "mem.csv"
    doc = js("model", "mem", "--config", "base", "--batch", "4", "--seq", "2048", "--dtype-bytes", "2",
             "--attention", "both", "--out", str(out))
    mha, gqa = doc["estimates"]
    for e in (mha, gqa):
        assert set(e) >= {"weights_bytes", "kv_cache_bytes_per_layer", "kv_cache_bytes_total",
                          "activations_bytes", "total_bytes", "assumptions"}
    assert mha["kv_cache_bytes_per_layer"] == 48 * 2**20 and gqa["kv_cache_bytes_per_layer"] == 16 * 2**20
    assert len(list(csv.DictReader(out.open()))) == 2
    assert (tmp_path / "mem.png").stat().st_size > 0
    table = run("model", "mem", "--config", "base", "--attention", "both", "--format", "table").stdout
    assert "66.7%" in table


def test_train_toy_generate_and_filter(tmp_path, small_corpus):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"profile": "desk-tiny", "d_model": 32, "d_ff": 48, "vocab_size": 320, "max_seq": 32}))
    trace, ck, tok = tmp_path / "trace.csv", tmp_path / "m.ck", tmp_path / "tok.json"
    argv = ["model", "train-toy", "--config", str(cfg), "--corpus", str(small_corpus), "--steps", "40",
            "--seed", "1", "--trace", str(trace), "--checkpoint", str(ck), "--tokenizer-out", str(tok)]
    doc = js(*argv)
    assert doc["steps"] == 40 and doc["final_loss"] < doc["initial_loss"]
    rows = list(csv.DictReader(trace.open()))
    assert list(rows[0]) == ["step", "loss", "grad_norm", "lr"] and len(rows) == 40
    assert (tmp_path / "trace.png").stat().st_size > 0
    first = trace.read_text()
    js(*argv)
    assert trace.read_text() == first

    gen = js("model", "generate", "--checkpoint", str(ck), "--tokenizer", str(tok), "--prompt", "the", "--max-new", "8")
    assert len(gen["ids"]) == 8
    assert js("model", "generate", "--checkpoint", str(ck), "--tokenizer", str(tok), "--prompt", "the",
              "--max-new", "8")["ids"] == gen["ids"]
    over = run("model", "generate", "--checkpoint", str(ck), "--tokenizer", str(tok), "--max-new", "100", ok=False)
    assert over.returncode == 2

    docs = tmp_path / "docs"
    docs.mkdir()
    paras = [p for p in small_corpus.read_text().splitlines() if len(p) > 400][:30]
    for i, p in enumerate(paras):
        (docs / f"d{i:02d}.txt").write_text(p)
    (docs / "dup.txt").write_text(paras[0])
    report = tmp_path / "report.json"
    filt = ["corpus", "filter", "--in", str(docs), "--out", str(tmp_path / "kept"), "--tokenizer", str(tok),
            "--min-len", "50", "--report", str(report)]
    out = js(*filt, "--scorer-checkpoint", str(ck))
    assert out["scorer"] == "model"
    assert "dup" in out["stages"][0]["dropped_ids"]
    assert json.loads(report.read_text())["kept_ids"] == out["kept_ids"]
    kept = (tmp_path / "kept" / "kept.jsonl").read_text().splitlines()
    assert len(kept) == len(out["kept_ids"])
    assert "dedup" in run(*filt).stdout


def test_gradcheck_cli():
    doc = js("model", "gradcheck", "--op", "rms_norm", "--trials", "3")
    assert doc["results"][0]["passed"]
    assert run("model", "gradcheck", "--op", "nope", ok=False).returncode == 1


@pytest.mark.parametrize("argv,code", [
    (["desklm"], 1),
    (["desklm", "bogus"], 1),
    (["tok", "encode", "--text", "x"], 1),
    (["model", "mem", "--config", "base", "--format", "yaml"], 1),
    (["model", "describe", "--config", "no-such-profile"], 2),
    (["tok", "encode", "--tokenizer", "/nonexistent.json", "--text", "x"], 2),
    (["desklm", "data", "download", "--out", "/tmp/x"], 2),
])
def test_exit_codes(argv, code):
    proc = run(*argv, ok=False)
    assert proc.returncode == code
    assert proc.stderr


def test_bad_ids_is_usage_error(tok_file):
    assert run("tok", "decode", "--tokenizer", str(tok_file), "--ids", "1 x", ok=False).returncode == 1
    assert run("tok", "decode", "--tokenizer", str(tok_file), "--ids", "99999", ok=False).returncode == 2


def test_module_entry_point_and_inprocess(capsys):
    proc = subprocess.run([sys.executable, "-m", "desklm", "model", "describe", "--config", "desk-tiny",
                           "--format", "json"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["groups"] == 2
    assert main(["model", "describe", "--config", "desk-tiny"]) == 0
    assert "ffn" in capsys.readouterr().out
