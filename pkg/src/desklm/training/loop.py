"""Single-process toy training: forward, loss, backward, clip, schedule, AdamW."""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..autodiff import Var
from ..errors import ConfigError, InputError, NumericError
from ..model.config import ModelConfig
from ..model.transformer import ModelParams, forward_var, init_params
from ..tokenizer.bpe import TrainerConfig
from ..tokenizer.core import Tokenizer
from .optim import OptimizerHp, OptimizerState, adamw_step, clip_grad_norm, cross_entropy_loss, global_norm
from .schedule import Schedule, lr_at

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("step", "loss", "grad_norm", "lr")


@dataclass
class LossTrace:
    step: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)

    def append(self, step: int, loss: float, grad_norm: float, lr: float) -> None:
        self.step.append(step)
        self.loss.append(loss)
        self.grad_norm.append(grad_norm)
        self.lr.append(lr)

    def __len__(self) -> int:
        return len(self.step)

    def rows(self):
        return zip(self.step, self.loss, self.grad_norm, self.lr)

    def final_loss(self, window: int = 50) -> float:
        """Mean loss over the last ``window`` steps (single batches are noisy)."""
        tail = self.loss[-window:]
        return float(np.mean(tail)) if tail else math.nan

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for s, l, g, r in self.rows():
                w.writerow([s, repr(l), repr(g), repr(r)])

    @classmethod
    def read_csv(cls, path: str | os.PathLike) -> "LossTrace":
        trace = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                trace.append(int(row["step"]), float(row["loss"]), float(row["grad_norm"]), float(row["lr"]))
        return trace


class TrainingDiverged(NumericError):
    """Loss or gradient went non-finite; ``trace`` holds every step up to the failure."""

    def __init__(self, message: str, trace: LossTrace):
        super().__init__(message)
        self.trace = trace


@dataclass
class ToyRun:
    trace: LossTrace
    params: ModelParams
    tokenizer: Tokenizer
    n_tokens: int
    unigram_entropy: float
    seconds: float


def toy_schedule(steps: int, lr_max: float = 2e-3) -> Schedule:
    """The production schedule's shape compressed to a short run: 5% warmup, cosine to a tenth of the peak."""
    warmup = max(1, steps // 20)
    return Schedule(lr_max=lr_max, lr_min=lr_max / 10, warmup_steps=warmup, lr_decay_steps=max(steps, warmup + 1))


def unigram_entropy(ids: Sequence[int]) -> float:
    """Entropy in nats of the empirical token distribution."""
    counts = np.fromiter(Counter(ids).values(), dtype=np.float64)
    if counts.size == 0:
        return 0.0
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def read_corpus(path: str | os.PathLike) -> list[str]:
    text = Path(path).read_text(encoding="utf-8", errors="surrogateescape")
    return text.splitlines(keepends=True)


def tokenize_corpus(tokenizer: Tokenizer, docs: Sequence[str]) -> np.ndarray:
    ids: list[int] = []
    for d in docs:
        ids.extend(tokenizer.encode_fast(d))
    return np.asarray(ids, dtype=np.int64)


def window_batches(ids: np.ndarray, seq_len: int, batch_size: int, seed: int):
    """Endless stream of ``(inputs, targets)`` built from contiguous ``seq_len + 1`` windows.

    Windows tile the stream without overlap and are visited in a fresh seeded
    permutation each epoch.
    """
    n_windows = (ids.size - 1) // seq_len
    if n_windows < batch_size:
        raise InputError(f"corpus yields {n_windows} windows of {seq_len} tokens, need at least {batch_size}")
    rng = np.random.default_rng(seed)
    offsets = np.arange(seq_len + 1)
    while True:
        order = rng.permutation(n_windows)
        for i in range(0, n_windows - batch_size + 1, batch_size):
            starts = order[i:i + batch_size] * seq_len
            chunk = ids[starts[:, None] + offsets]
            yield chunk[:, :-1], chunk[:, 1:]


def _decay_mask(params: ModelParams) -> list[bool]:
    return [np.ndim(v.data if isinstance(v, Var) else v) >= 2 for _, v in params.named_parameters()]


def train_toy(config: ModelConfig, corpus_path: str | os.PathLike, steps: int, seed: int = 0, *,
              tokenizer: Tokenizer | None = None, batch_size: int = 8, seq_len: int | None = None,
              schedule: Schedule | None = None, hp: OptimizerHp | None = None,
              dtype=np.float32, log_every: int = 100) -> ToyRun:
    """Train a fresh model on the text at ``corpus_path`` for ``steps`` updates.

    Without a tokenizer one is trained on the same corpus at ``config.vocab_size``.
    The trace records, per step, the loss of the batch before the update, the
    global gradient norm before clipping and the learning rate applied.
    Deterministic given ``seed``.
    """
    if steps < 1:
        raise ConfigError("steps must be at least 1")
    started = time.perf_counter()
    docs = read_corpus(corpus_path)
    if tokenizer is None:
        tokenizer = Tokenizer.train(docs, TrainerConfig(vocab_size=config.vocab_size))
    elif tokenizer.vocab_size != config.vocab_size:
        raise ConfigError(f"tokenizer vocab {tokenizer.vocab_size} != model vocab {config.vocab_size}")
    ids = tokenize_corpus(tokenizer, docs)
    entropy = unigram_entropy(ids.tolist())
    seq_len = seq_len or config.max_seq
    if seq_len > config.max_seq:
        raise ConfigError(f"seq_len {seq_len} exceeds max_seq {config.max_seq}")
    schedule = schedule or toy_schedule(steps)
    hp = hp or OptimizerHp()

    params = init_params(config, seed, dtype=dtype)
    arrays = [a for _, a in params.named_parameters()]
    mask = _decay_mask(params)
    state = OptimizerState.zeros_like(arrays)
    batches = window_batches(ids, seq_len, batch_size, seed)
    trace = LossTrace()
    log.info("toy training: %d tokens, %d steps, unigram entropy %.4f nats", ids.size, steps, entropy)

    for step in range(1, steps + 1):
        x, y = next(batches)
        lr = lr_at(step, schedule)
        leaves = params.as_vars()
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                loss = cross_entropy_loss(forward_var(leaves, x), y)
                loss_value = float(loss.data)
                loss.backward()
        except NumericError as exc:
            trace.append(step, math.nan, math.nan, lr)
            raise TrainingDiverged(f"non-finite activations at step {step}", trace) from exc
        grads = [v.grad if v.grad is not None else np.zeros_like(v.data) for _, v in leaves.named_parameters()]
        norm = global_norm(grads)
        if not (math.isfinite(loss_value) and math.isfinite(norm)):
            trace.append(step, loss_value, norm, lr)
            raise TrainingDiverged(f"non-finite loss/gradient at step {step}", trace)
        clip_grad_norm(grads, hp.clip_norm)
        adamw_step(arrays, grads, state, hp, lr, mask)
        trace.append(step, loss_value, norm, lr)
        if log_every and step % log_every == 0:
            log.info("step %d loss %.4f grad_norm %.3f lr %.2e", step, loss_value, norm, lr)

    return ToyRun(trace, params, tokenizer, int(ids.size), entropy, time.perf_counter() - started)
