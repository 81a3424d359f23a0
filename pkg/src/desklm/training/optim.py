"""Cross-entropy, global-norm clipping and decoupled-weight-decay Adam."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigError, InputError, NumericError, ShapeError


@dataclass(frozen=True)
class OptimizerHp:
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    weight_decay: float = 0.1
    clip_norm: float = 1.0

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("betas must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")


@dataclass
class OptimizerState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "OptimizerState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def cross_entropy_loss(logits, targets):
    """Mean negative log-likelihood in nats per position, max-shifted for stability."""
    vocab = np.shape(logits)[-1]
    t = np.asarray(targets)
    if t.size and (t.min() < 0 or t.max() >= vocab):
        raise InputError(f"targets must lie in [0, {vocab})")
    if np.shape(logits)[:-1] != t.shape:
        raise ShapeError(f"logits {np.shape(logits)} do not match targets {t.shape}")
    if isinstance(logits, ad.Var):
        return ad.cross_entropy(logits, t)
    with ad.no_grad():
        return float(ad.cross_entropy(logits, t).data)


def token_losses(logits: np.ndarray, targets) -> np.ndarray:
    """Per-position negative log-likelihoods."""
    flat = np.asarray(logits, dtype=np.float64).reshape(-1, np.shape(logits)[-1])
    t = np.asarray(targets).reshape(-1)
    z = flat - flat.max(axis=1, keepdims=True)
    return np.log(np.exp(z).sum(axis=1)) - z[np.arange(t.size), t]


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in grads))


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float = 1.0) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``; return the factor."""
    norm = global_norm(grads)
    if not math.isfinite(norm):
        raise NumericError("non-finite gradient norm")
    if norm <= max_norm:
        return 1.0
    factor = max_norm / norm
    for g in grads:
        g *= factor
    return factor


def adamw_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: OptimizerState,
               hp: OptimizerHp, lr: float, decay_mask: Sequence[bool] | None = None) -> None:
    """One in-place AdamW update with bias correction.

    Decay is decoupled: ``p -= lr * wd * p`` happens independently of the moment
    update. ``decay_mask`` selects which tensors are decayed (all by default).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state must align")
    if lr < 0:
        raise ConfigError("lr must be non-negative")
    state.t += 1
    b1, b2 = hp.beta1, hp.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")
        m, v = state.m[i], state.v[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        if hp.weight_decay and (decay_mask is None or decay_mask[i]):
            p *= 1.0 - lr * hp.weight_decay
        p -= lr * (m / c1) / (np.sqrt(v / c2) + hp.eps)
