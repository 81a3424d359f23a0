from .batch import BatchRequest, ThroughputReport, batch_encode, throughput_bench
from .bpe import MergeRule, TrainerConfig, apply_merge, count_pairs, train
from .core import FORMAT_VERSION, Tokenizer, Vocab, decode, encode, encode_fast, load, save
from .specials import DEFAULT_SPECIAL_TOKENS, RESERVED_SLOTS, SpecialTokenTable
from .trie import Trie, build_trie

__all__ = [
    "BatchRequest", "ThroughputReport", "batch_encode", "throughput_bench",
    "MergeRule", "TrainerConfig", "apply_merge", "count_pairs", "train",
    "FORMAT_VERSION", "Tokenizer", "Vocab", "decode", "encode", "encode_fast", "load", "save",
    "DEFAULT_SPECIAL_TOKENS", "RESERVED_SLOTS", "SpecialTokenTable",
    "Trie", "build_trie",
]
