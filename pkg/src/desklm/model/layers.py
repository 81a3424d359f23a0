"""Position encoding, normalisation and feed-forward building blocks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import differentiable
from ..errors import CapacityError, ConfigError, ShapeError
from .config import ModelConfig


@dataclass(frozen=True)
class RopeFrequencies:
    """Precomputed ``cos(m * theta_i)`` / ``sin(m * theta_i)``, shape ``[max_seq, head_dim // 2]``."""

    theta: np.ndarray
    cos: np.ndarray
    sin: np.ndarray

    @property
    def head_dim(self) -> int:
        return 2 * self.theta.size

    @property
    def max_seq(self) -> int:
        return self.cos.shape[0]


def rope_frequencies(config: ModelConfig | None = None, *, head_dim: int | None = None,
                     max_seq: int | None = None, theta: float | None = None) -> RopeFrequencies:
    """Rotation tables for ``theta_i = base ** (-2i / head_dim)``, ``i in [0, head_dim/2)``.

    Keyword arguments override the corresponding config fields.
    """
    head_dim = head_dim if head_dim is not None else config.head_dim
    max_seq = max_seq if max_seq is not None else config.max_seq
    base = theta if theta is not None else config.rope_theta
    if head_dim % 2:
        raise ConfigError(f"head_dim must be even, got {head_dim}")
    i = np.arange(head_dim // 2, dtype=np.float64)
    freqs = base ** (-2.0 * i / head_dim)
    angles = np.outer(np.arange(max_seq, dtype=np.float64), freqs)
    cos, sin = np.cos(angles), np.sin(angles)
    for a in (freqs, cos, sin):
        a.setflags(write=False)
    return RopeFrequencies(freqs, cos, sin)


@differentiable
def apply_rope(x, positions, freqs: RopeFrequencies):
    """Rotate each interleaved pair ``(x[2i], x[2i+1])`` of ``x[b, s, h, d]`` by ``m * theta_i``."""
    x = ad.as_var(x)
    if x.shape[-1] != freqs.head_dim:
        raise ShapeError(f"head_dim {x.shape[-1]} does not match frequency table ({freqs.head_dim})")
    pos = np.asarray(positions, dtype=np.int64)
    if pos.size and (pos.min() < 0 or pos.max() >= freqs.max_seq):
        raise CapacityError(f"positions must lie in [0, {freqs.max_seq}), got [{pos.min()}, {pos.max()}]")
    if pos.size != x.shape[1]:
        raise ShapeError(f"{pos.size} positions for a sequence of length {x.shape[1]}")
    cos = freqs.cos[pos][None, :, None, :].astype(x.dtype)
    sin = freqs.sin[pos][None, :, None, :].astype(x.dtype)
    return ad.rotate_pairs(x, cos, sin)


def _check_gain(x, gamma):
    if np.shape(gamma) != (np.shape(x)[-1],):
        raise ShapeError(f"gain of shape {np.shape(gamma)} for features of size {np.shape(x)[-1]}")


@differentiable
def rms_norm(x, gamma, eps: float = 1e-6):
    """``x * gamma / sqrt(RMS(x) + eps)`` with ``RMS(x) = sqrt(mean(x**2))``.

    This keeps the root-mean-square itself (not the mean square) under the outer
    square root, so the output scales like ``sqrt(|x|)`` rather than being scale
    invariant.
    """
    _check_gain(x, gamma)
    if eps < 0:
        raise ConfigError("eps must be non-negative")
    return ad.rms_norm_literal(x, gamma, eps)


def layer_norm_ref(x, gamma, beta, eps: float = 1e-6) -> np.ndarray:
    """Reference LayerNorm, ``gamma * (x - mean) / sqrt(var + eps) + beta``. Comparison only."""
    x = np.asarray(x, dtype=np.float64)
    _check_gain(x, gamma)
    mu = x.mean(axis=-1, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=-1, keepdims=True)
    return np.asarray(gamma) * (x - mu) / np.sqrt(var + eps) + np.asarray(beta)


@differentiable
def swiglu(x, w1, w2, w3):
    """``(silu(x @ w1) * (x @ w3)) @ w2``."""
    d = np.shape(x)[-1]
    if np.shape(w1) != np.shape(w3) or np.shape(w1)[0] != d or np.shape(w2) != np.shape(w1)[::-1]:
        raise ShapeError(
            f"swiglu weights need w1, w3: [{d}, d_ff] and w2: [d_ff, {d}]; "
            f"got {np.shape(w1)}, {np.shape(w3)}, {np.shape(w2)}"
        )
    gate = ad.silu(ad.matmul(x, w1))
    return ad.matmul(ad.mul(gate, ad.matmul(x, w3)), w2)


@differentiable
def repeat_kv(kv, groups: int):
    """Expand ``[b, s, n_kv, d]`` to ``[b, s, n_kv * groups, d]``; kv head j serves query heads j*groups...(j+1)*groups-1."""
    if not isinstance(groups, (int, np.integer)) or groups < 1:
        raise ConfigError(f"groups must be a positive integer, got {groups!r}")
    if groups == 1:
        return ad.as_var(kv)
    return ad.repeat(kv, int(groups), axis=2)
