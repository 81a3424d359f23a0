"""Seeded synthetic English-like corpora for tests, benchmarks and toy training.

Text comes from a first-order word Markov chain over pseudo-words built from
syllables, with Zipf-distributed word frequencies, so the data has both a
skewed unigram distribution and strong local context.
"""

from __future__ import annotations

import numpy as np

_ONSETS = ["", "b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "v", "w", "th", "st", "pr", "ch"]
_VOWELS = ["a", "e", "i", "o", "u", "ea", "ou", "io"]
_CODAS = ["", "", "n", "r", "s", "t", "l", "nd", "ng", "st"]


def make_lexicon(rng: np.random.Generator, size: int) -> list[str]:
    words: list[str] = []
    seen = set()
    while len(words) < size:
        n_syl = int(rng.choice([1, 1, 2, 2, 2, 3]))
        w = "".join(
            _ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] + _CODAS[rng.integers(len(_CODAS))]
            for _ in range(n_syl)
        )
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


class MarkovText:
    """Word-level Markov generator; each word has a small Zipf-weighted successor set."""

    def __init__(self, seed: int = 0, lexicon_size: int = 600, fanout: int = 12):
        rng = np.random.default_rng(seed)
        self.words = make_lexicon(rng, lexicon_size)
        ranks = np.arange(1, lexicon_size + 1)
        self.unigram = (1.0 / ranks) / np.sum(1.0 / ranks)
        self.successors = rng.choice(lexicon_size, size=(lexicon_size, fanout), p=self.unigram)
        w = 1.0 / np.arange(1, fanout + 1) ** 1.2
        self.succ_p = w / w.sum()

    def sentence(self, rng: np.random.Generator) -> str:
        n = int(rng.integers(5, 16))
        cur = int(rng.choice(len(self.words), p=self.unigram))
        out = [self.words[cur]]
        for _ in range(n - 1):
            cur = int(self.successors[cur, rng.choice(len(self.succ_p), p=self.succ_p)])
            out.append(self.words[cur])
        text = " ".join(out)
        if rng.random() < 0.15:
            k = int(rng.integers(1, len(out)))
            text = " ".join(out[:k]) + ", " + " ".join(out[k:])
        return text[0].upper() + text[1:] + str(rng.choice([".", ".", ".", "?", "!"]))

    def document(self, rng: np.random.Generator, n_sentences: int) -> str:
        return " ".join(self.sentence(rng) for _ in range(n_sentences))


def synthetic_corpus(n_bytes: int, seed: int = 0, lexicon_seed: int | None = None) -> str:
    """Line-delimited documents totalling roughly ``n_bytes`` bytes.

    ``lexicon_seed`` fixes the language (lexicon and transitions) independently
    of ``seed``, which drives sampling; two seeds under one lexicon give
    held-in / held-out splits from the same distribution.
    """
    gen = MarkovText(seed if lexicon_seed is None else lexicon_seed)
    rng = np.random.default_rng([seed, 1])
    lines = []
    total = 0
    while total < n_bytes:
        line = gen.document(rng, int(rng.integers(2, 8))) + "\n"
        lines.append(line)
        total += len(line.encode("utf-8"))
    return "".join(lines)
