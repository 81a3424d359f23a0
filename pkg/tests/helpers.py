"""Seeded generators and straight-line reference implementations used as test oracles."""

from __future__ import annotations

import contextlib
import math
import time

import numpy as np

from desklm.model import ModelConfig

_POOLS = [
    [chr(c) for c in range(0x20, 0x7F)],
    ["\x00", "\t", "\n", "\r"],
    [chr(c) for c in range(0xA0, 0x250)],
    [chr(c) for c in range(0x4E00, 0x4E80)],
    ["\U0001F600", "\U0001F680", "\U0001F9E0", "\U0001F44D\U0001F3FD", "‍", "﻿"],
    ["<|user|>", "<s>", "</s>", "<pad>", "<|assistant|", "<"],
]


ACCEPTANCE: list[str] = []


@contextlib.contextmanager
def criterion(number: int, title: str, capsys=None):
    """Record one acceptance line; any exception inside the block marks it FAIL and propagates."""
    detail: dict = {}
    started = time.perf_counter()
    status = "FAIL"
    try:
        yield detail
        status = "PASS"
    finally:
        extra = " ".join(f"{k}={v}" for k, v in detail.items())
        line = f"AC{number:02d} {status} {title} ({time.perf_counter() - started:.1f}s) {extra}".rstrip()
        ACCEPTANCE.append(line)
        if capsys is not None:
            with capsys.disabled():
                print("\n" + line)
        else:
            print(line)


def fuzz_strings(n: int, seed: int = 0, max_len: int = 40) -> list[str]:
    """Valid Unicode strings mixing ASCII, multibyte scripts, emoji, NUL and special-token lookalikes."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = int(rng.integers(0, max_len + 1))
        weights = rng.dirichlet(np.ones(len(_POOLS)))
        picks = rng.choice(len(_POOLS), size=k, p=weights)
        out.append("".join(_POOLS[p][rng.integers(len(_POOLS[p]))] for p in picks))
    return out


def random_config(rng, n_kv_equals_heads=False, max_seq=16, vocab=37) -> ModelConfig:
    hd = int(rng.choice([2, 4]))
    n_kv = int(rng.integers(1, 3))
    n_heads = n_kv if n_kv_equals_heads else n_kv * int(rng.integers(1, 4))
    return ModelConfig(n_layers=int(rng.integers(1, 3)), n_heads=n_heads, n_kv_heads=n_kv, d_model=hd * n_heads,
                       d_ff=int(rng.integers(3, 12)), vocab_size=vocab, max_seq=max_seq)


def reference_mha(x, w_q, w_k, w_v, w_o, n_heads, theta=10000.0):
    """Loop-based multi-head causal attention with interleaved rotary encoding."""
    b, s, d = x.shape
    hd = d // n_heads
    inv = theta ** (-2.0 * np.arange(hd // 2) / hd)
    out = np.zeros_like(x)
    for bi in range(b):
        q = x[bi] @ w_q
        k = x[bi] @ w_k
        v = x[bi] @ w_v
        ctx = np.zeros((s, d))
        for h in range(n_heads):
            sl = slice(h * hd, (h + 1) * hd)
            qh, kh, vh = q[:, sl].copy(), k[:, sl].copy(), v[:, sl]
            for m in range(s):
                for i in range(hd // 2):
                    c, sn = math.cos(m * inv[i]), math.sin(m * inv[i])
                    for arr in (qh, kh):
                        e, o = arr[m, 2 * i], arr[m, 2 * i + 1]
                        arr[m, 2 * i], arr[m, 2 * i + 1] = e * c - o * sn, e * sn + o * c
            for m in range(s):
                scores = np.array([qh[m] @ kh[n] / math.sqrt(hd) for n in range(m + 1)])
                p = np.exp(scores - scores.max())
                p /= p.sum()
                ctx[m, sl] = p @ vh[: m + 1]
        out[bi] = ctx @ w_o
    return out
