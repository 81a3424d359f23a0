"""Command-line front end: ``desklm {tok,model,corpus,data} ...``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DeskLMError

log = logging.getLogger("desklm")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(text if text is not None else _as_text(payload))


def _as_text(payload: dict, indent: str = "") -> str:
    lines = []
    for k, v in payload.items():
        if isinstance(v, dict):
            lines.append(f"{indent}{k}:")
            lines.append(_as_text(v, indent + "  "))
        else:
            lines.append(f"{indent}{k}: {v}")
    return "\n".join(lines)


def _read_text(args) -> str:
    if args.text is not None:
        return args.text
    return Path(args.file).read_text(encoding="utf-8")


# tok -------------------------------------------------------------------------

def cmd_tok_train(args) -> int:
    from .tokenizer import Tokenizer, TrainerConfig
    from .tokenizer.batch import read_documents
    docs = read_documents(args.corpus)
    tok = Tokenizer.train(docs, TrainerConfig(vocab_size=args.vocab_size, min_frequency=args.min_frequency))
    tok.save(args.out)
    _emit(args, {"out": str(args.out), "vocab_size": tok.vocab_size, "merges": len(tok.merges),
                 "documents": len(docs)})
    return EXIT_OK


def cmd_tok_encode(args) -> int:
    from .tokenizer import Tokenizer
    tok = Tokenizer.load(args.tokenizer)
    ids = tok.encode_fast(_read_text(args), with_specials=args.specials)
    if args.public_ids:
        ids = tok.public_ids(ids)
    _emit(args, {"ids": ids, "count": len(ids)}, " ".join(map(str, ids)))
    return EXIT_OK


def cmd_tok_decode(args) -> int:
    from .tokenizer import Tokenizer
    tok = Tokenizer.load(args.tokenizer)
    raw = args.ids if args.ids is not None else Path(args.ids_file).read_text()
    try:
        ids = [int(x) for x in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"ids must be integers: {exc}") from exc
    data = tok.decode_bytes(ids)
    text = data.decode("utf-8", errors="replace")
    _emit(args, {"text": text, "bytes": len(data)}, text)
    return EXIT_OK


def cmd_tok_bench(args) -> int:
    from .tokenizer import Tokenizer, throughput_bench
    tok = Tokenizer.load(args.tokenizer)
    _emit(args, throughput_bench(tok, args.corpus, args.workers).to_dict())
    return EXIT_OK


def cmd_tok_compress(args) -> int:
    from .metrics import compression_ratio, effective_context
    from .tokenizer import Tokenizer
    report = compression_ratio(Tokenizer.load(args.tokenizer), args.corpus)
    out = report.to_dict()
    out["context_tokens"] = args.context
    out["effective_context_chars"] = effective_context(args.context, report.chars_per_token)
    _emit(args, out)
    return EXIT_OK


# model -----------------------------------------------------------------------

FORMULAS = {
    "embedding": "vocab_size * d_model (x2 when untied)",
    "attention": "n_layers * (2 * d_model^2 + 2 * d_model * n_kv_heads * head_dim)",
    "ffn": "n_layers * 3 * d_model * d_ff",
    "norms": "(2 * n_layers + 1) * d_model",
}


def cmd_model_describe(args) -> int:
    from .model import load_config, param_count
    cfg = load_config(args.config)
    counts = param_count(cfg)
    payload = {"config": cfg.to_dict(), "head_dim": cfg.head_dim, "groups": cfg.groups,
               "params": counts, "formulas": FORMULAS}
    lines = [f"{k:<10} {v:>14,d}   {FORMULAS.get(k, '')}" for k, v in counts.items()]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def _memory_table(estimates) -> str:
    from .kvcache import MIB
    rows = [f"{'attention':<10} {'kv/layer MiB':>13} {'kv total MiB':>13} {'weights MiB':>12} {'acts MiB':>10} {'total MiB':>10}"]
    for e in estimates:
        rows.append(f"{e.attention_kind:<10} {e.kv_cache_bytes_per_layer / MIB:>13.2f} {e.kv_cache_bytes_total / MIB:>13.2f}"
                    f" {e.weights_bytes / MIB:>12.2f} {e.activations_bytes / MIB:>10.2f} {e.total_bytes / MIB:>10.2f}")
    if len(estimates) == 2:
        saving = 1 - estimates[1].kv_cache_bytes_per_layer / estimates[0].kv_cache_bytes_per_layer
        rows.append(f"kv saving {estimates[1].attention_kind} vs {estimates[0].attention_kind}: {100 * saving:.1f}%")
    return "\n".join(rows)


def cmd_model_mem(args) -> int:
    from .kvcache import memory_estimate
    from .model import load_config
    cfg = load_config(args.config)
    kinds = ["mha", "gqa"] if args.attention == "both" else [args.attention]
    ests = [memory_estimate(cfg, args.batch, args.seq, args.dtype_bytes, k) for k in kinds]
    if args.out:
        out = Path(args.out)
        with open(out, "w", newline="") as fh:
            fields = list(ests[0].to_dict().keys() - {"assumptions"})
            fields.sort()
            w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
            w.writeheader()
            for e in ests:
                w.writerow(e.to_dict())
        from .report import figure_path, plot_memory
        plot_memory(ests, figure_path(out))
    payload = ests[0].to_dict() if len(ests) == 1 else {"estimates": [e.to_dict() for e in ests]}
    _emit(args, payload, _memory_table(ests))
    return EXIT_OK


def cmd_model_train_toy(args) -> int:
    from .model import load_config, save_checkpoint
    from .tokenizer import Tokenizer
    from .training import TrainingDiverged, toy_schedule, train_toy
    cfg = load_config(args.config)
    tok = Tokenizer.load(args.tokenizer) if args.tokenizer else None
    trace_path = Path(args.trace)
    try:
        run = train_toy(cfg, args.corpus, args.steps, args.seed, tokenizer=tok, batch_size=args.batch_size,
                        schedule=toy_schedule(args.steps, args.lr_max))
    except TrainingDiverged as exc:
        exc.trace.write_csv(trace_path)
        raise
    run.trace.write_csv(trace_path)
    payload = {"steps": len(run.trace), "initial_loss": run.trace.loss[0], "final_loss": run.trace.final_loss(),
               "unigram_entropy": run.unigram_entropy, "tokens": run.n_tokens, "trace": str(trace_path)}
    log.info("trained %d steps in %.1f s", len(run.trace), run.seconds)
    if not args.no_figure:
        from .report import figure_path, plot_loss_trace
        payload["figure"] = str(plot_loss_trace(run.trace, figure_path(trace_path), run.unigram_entropy))
    if args.checkpoint:
        save_checkpoint(run.params, args.checkpoint)
        payload["checkpoint"] = str(args.checkpoint)
    if args.tokenizer_out:
        run.tokenizer.save(args.tokenizer_out)
        payload["tokenizer"] = str(args.tokenizer_out)
    _emit(args, payload)
    return EXIT_OK


def cmd_model_gradcheck(args) -> int:
    from .training import run_gradchecks
    try:
        results = run_gradchecks(args.op, args.trials, args.seed)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from exc
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.op:<18} max_rel_error={r.max_rel_error:.3e} trials={r.trials}"
             for r in results]
    _emit(args, {"results": [r.to_dict() for r in results]}, "\n".join(lines))
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def cmd_model_generate(args) -> int:
    from .generate import generate
    from .model import load_checkpoint
    from .tokenizer import Tokenizer
    params = load_checkpoint(args.checkpoint, dtype=np.float64 if args.float64 else np.float32)
    tok = Tokenizer.load(args.tokenizer)
    gen = generate(params, tok, args.prompt, args.max_new, args.seed, args.temperature)
    _emit(args, {"prompt": args.prompt, "text": gen.text, "ids": gen.new_ids}, gen.text)
    return EXIT_OK


# corpus / data -----------------------------------------------------------------

def cmd_corpus_filter(args) -> int:
    from .corpus import (FilterConfig, ModelScorer, UnigramScorer, filter_documents, read_documents_dir,
                         write_documents_dir)
    from .model import load_checkpoint
    from .tokenizer import Tokenizer
    tok = Tokenizer.load(args.tokenizer)
    docs = read_documents_dir(args.in_dir)
    if args.scorer_checkpoint:
        scorer = ModelScorer(load_checkpoint(args.scorer_checkpoint), tok)
    else:
        scorer = UnigramScorer(tok, [d.text for d in docs])
    cfg = FilterConfig(min_len=args.min_len, max_len=args.max_len, dedup_threshold=args.dedup_threshold,
                       ppl_percentile=args.ppl_percentile, ppl_threshold=args.ppl_threshold,
                       hash_seed=args.hash_seed, workers=args.workers)
    kept, report = filter_documents(docs, tok, scorer, cfg)
    write_documents_dir(kept, args.out_dir)
    doc = report.to_dict()
    doc["scorer"] = "model" if args.scorer_checkpoint else "unigram"
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    summary = {s["name"]: f"kept {s['kept']} dropped {s['dropped']}" for s in doc["stages"]}
    summary["ppl_threshold"] = doc["ppl_threshold"]
    _emit(args, doc, _as_text(summary))
    return EXIT_OK


def cmd_data_synth(args) -> int:
    from .synth import synthetic_corpus
    text = synthetic_corpus(args.bytes, seed=args.seed)
    Path(args.out).write_text(text, encoding="utf-8")
    _emit(args, {"out": str(args.out), "bytes": len(text.encode("utf-8")), "seed": args.seed})
    return EXIT_OK


def cmd_data_download(args) -> int:
    raise DeskLMError(
        f"dataset {args.dataset!r} is not vendored and automatic download is not implemented; "
        f"place the raw text at {args.out} and pass it via --corpus")


# parser ----------------------------------------------------------------------

def _fmt(choices=("json", "text")) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--format", choices=choices, default="text")
    return p


def build_parser() -> argparse.ArgumentParser:
    from .tokenizer.batch import default_workers
    fmt = _fmt()
    parser = _Parser(prog="desklm", description="Desk-scale tokenizer and transformer toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    tok = groups.add_parser("tok", help="tokenizer").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = tok.add_parser("train", parents=[fmt], help="train a BPE vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab-size", type=int, default=128000)
    p.add_argument("--min-frequency", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tok_train)

    p = tok.add_parser("encode", parents=[fmt], help="text to ids")
    p.add_argument("--tokenizer", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--text")
    src.add_argument("--file")
    p.add_argument("--specials", action="store_true", help="recognise special-token literals")
    p.add_argument("--public-ids", action="store_true", help="report specials by their table ids")
    p.set_defaults(func=cmd_tok_encode)

    p = tok.add_parser("decode", parents=[fmt], help="ids to text")
    p.add_argument("--tokenizer", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ids", help="whitespace or comma separated ids")
    src.add_argument("--ids-file")
    p.set_defaults(func=cmd_tok_decode)

    p = tok.add_parser("bench", parents=[fmt], help="encoder throughput")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--workers", type=int, default=default_workers())
    p.set_defaults(func=cmd_tok_bench)

    p = tok.add_parser("compress", parents=[fmt], help="chars per token and effective context")
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--context", type=int, default=2048)
    p.set_defaults(func=cmd_tok_compress)

    model = groups.add_parser("model", help="transformer").add_subparsers(dest="cmd", required=True,
                                                                           parser_class=_Parser)
    p = model.add_parser("describe", parents=[fmt], help="parameter breakdown")
    p.add_argument("--config", required=True, help="JSON file or profile name")
    p.set_defaults(func=cmd_model_describe)

    p = model.add_parser("mem", parents=[_fmt(("json", "table", "text"))], help="inference memory estimate")
    p.add_argument("--config", required=True)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--seq", type=int, default=2048)
    p.add_argument("--dtype-bytes", type=int, default=2)
    p.add_argument("--attention", choices=("gqa", "mha", "both"), default="gqa")
    p.add_argument("--out", help="CSV path; a bar chart is written next to it")
    p.set_defaults(func=cmd_model_mem)

    p = model.add_parser("train-toy", parents=[fmt], help="train a small model on a text file")
    p.add_argument("--config", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", required=True, help="CSV path; a loss plot is written next to it")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr-max", type=float, default=2e-3)
    p.add_argument("--tokenizer", help="existing tokenizer; trained on the corpus when omitted")
    p.add_argument("--tokenizer-out")
    p.add_argument("--checkpoint")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_model_train_toy)

    p = model.add_parser("gradcheck", parents=[fmt], help="finite-difference gradient checks")
    p.add_argument("--op", default="all")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_model_gradcheck)

    p = model.add_parser("generate", parents=[fmt], help="sample a continuation")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--prompt", default="")
    p.add_argument("--max-new", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--float64", action="store_true")
    p.set_defaults(func=cmd_model_generate)

    corpus = groups.add_parser("corpus", help="quality filtering").add_subparsers(dest="cmd", required=True,
                                                                                  parser_class=_Parser)
    p = corpus.add_parser("filter", parents=[fmt], help="dedup, perplexity and length filtering")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--tokenizer", required=True)
    p.add_argument("--min-len", type=int, default=100)
    p.add_argument("--max-len", type=int, default=10_000)
    p.add_argument("--dedup-threshold", type=float, default=0.8)
    p.add_argument("--ppl-percentile", type=float, default=85.0)
    p.add_argument("--ppl-threshold", type=float, help="fixed cut instead of the batch percentile")
    p.add_argument("--scorer-checkpoint", help="model checkpoint; unigram scorer when omitted")
    p.add_argument("--hash-seed", type=lambda s: int(s, 0), default=None)
    p.add_argument("--workers", type=int, default=default_workers())
    p.add_argument("--report")
    p.set_defaults(func=cmd_corpus_filter)

    data = groups.add_parser("data", help="corpora").add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = data.add_parser("synth", parents=[fmt], help="write a seeded synthetic corpus")
    p.add_argument("--bytes", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_data_synth)

    p = data.add_parser("download", parents=[fmt], help="fetch a public evaluation corpus (not implemented)")
    p.add_argument("--dataset", default="wikitext-103")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_data_download)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.group == "corpus" and getattr(args, "hash_seed", 0) is None:
            from .corpus.minhash import DEFAULT_SEED
            args.hash_seed = DEFAULT_SEED
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DeskLMError, OSError, ValueError) as exc:
        print(f"desklm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _group_main(group: str):
    def run(argv: Sequence[str] | None = None) -> int:
        return main([group, *(sys.argv[1:] if argv is None else argv)])
    return run


tok_main = _group_main("tok")
model_main = _group_main("model")
corpus_main = _group_main("corpus")


if __name__ == "__main__":
    sys.exit(main())
