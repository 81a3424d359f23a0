"""Central finite-difference checks of the analytic gradients.

Each registered op is wrapped as a scalar ``L = sum(op(inputs) * R)`` with a
fixed random cotangent ``R``; the tape's gradient of ``L`` with respect to each
input is compared coordinate-by-coordinate against ``(L(x+h) - L(x-h)) / 2h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from ..autodiff import Var
from ..model.layers import rms_norm, rope_frequencies, swiglu
from ..model.transformer import AttnParams, BlockParams, FfnParams, gqa_attention, transformer_block

ScalarFn = Callable[[np.ndarray], float]


def relative_error(a: np.ndarray, fd: np.ndarray) -> np.ndarray:
    return np.abs(a - fd) / np.maximum(np.maximum(np.abs(a), np.abs(fd)), 1e-8)


def finite_diff_gradcheck(f: ScalarFn, point, analytic, h: float = 1e-5,
                          probes: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Worst relative error between ``analytic`` (the gradient of ``f`` at ``point``) and central differences.

    With ``probes=None`` every coordinate is perturbed. Otherwise ``probes``
    random unit directions ``u`` are used and ``analytic . u`` is compared with
    the directional difference quotient, which keeps large points cheap.
    """
    x = np.array(point, dtype=np.float64)
    g = np.asarray(analytic, dtype=np.float64).reshape(x.shape)
    if probes is None:
        flat = x.reshape(-1)
        fd = np.empty(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f(x)
            flat[i] = orig - h
            down = f(x)
            flat[i] = orig
            fd[i] = (up - down) / (2.0 * h)
        return float(relative_error(g.reshape(-1), fd).max(initial=0.0))
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for _ in range(probes):
        u = rng.standard_normal(x.shape)
        u /= np.linalg.norm(u)
        fd = (f(x + h * u) - f(x - h * u)) / (2.0 * h)
        worst = max(worst, float(relative_error(np.sum(g * u), fd)))
    return worst


@dataclass(frozen=True)
class OpCase:
    """An op applied to a dict of float64 arrays."""

    fn: Callable[[Mapping[str, object]], object]
    inputs: dict[str, np.ndarray]


def check_case(case: OpCase, rng: np.random.Generator, h: float = 1e-5) -> float:
    """Max relative error over every input tensor of ``case``."""
    leaves = {k: Var(v.copy(), requires_grad=True) for k, v in case.inputs.items()}
    out = case.fn(leaves)
    cot = rng.standard_normal(out.shape)
    out.backward(cot)
    worst = 0.0
    for name, base in case.inputs.items():
        def scalar(x, name=name):
            vals = dict(case.inputs)
            vals[name] = x
            return float(np.sum(np.asarray(case.fn(vals)) * cot))
        grad = leaves[name].grad if leaves[name].grad is not None else np.zeros_like(base)
        worst = max(worst, finite_diff_gradcheck(scalar, base, grad, h))
    return worst


def _normal(rng, *shape, scale=1.0):
    return rng.standard_normal(shape) * scale


def _gain(rng, d):
    return 1.0 + 0.1 * rng.standard_normal(d)


def _rms_norm_case(rng) -> OpCase:
    d = int(rng.integers(4, 9))
    return OpCase(lambda v: rms_norm(v["x"], v["gamma"], 1e-6),
                  {"x": _normal(rng, 3, d), "gamma": _gain(rng, d)})


def _swiglu_case(rng) -> OpCase:
    d, f = int(rng.integers(4, 9)), int(rng.integers(6, 13))
    s = 1.0 / np.sqrt(d)
    return OpCase(lambda v: swiglu(v["x"], v["w1"], v["w2"], v["w3"]),
                  {"x": _normal(rng, 2, 3, d), "w1": _normal(rng, d, f, scale=s),
                   "w2": _normal(rng, f, d, scale=s), "w3": _normal(rng, d, f, scale=s)})


def _tiny_dims(rng):
    hd = 2 * int(rng.integers(1, 3))
    n_kv = int(rng.integers(1, 3))
    n_heads = n_kv * int(rng.integers(1, 3))
    seq = int(rng.integers(2, 5))
    return hd, n_heads, n_kv, seq


def _attn_inputs(rng, d, kv_dim):
    s = 1.0 / np.sqrt(d)
    return {"w_q": _normal(rng, d, d, scale=s), "w_k": _normal(rng, d, kv_dim, scale=s),
            "w_v": _normal(rng, d, kv_dim, scale=s), "w_o": _normal(rng, d, d, scale=s)}


def _attn(v) -> AttnParams:
    return AttnParams(v["w_q"], v["w_k"], v["w_v"], v["w_o"])


def _gqa_case(rng) -> OpCase:
    hd, n_heads, n_kv, seq = _tiny_dims(rng)
    d = hd * n_heads
    freqs = rope_frequencies(head_dim=hd, max_seq=8, theta=10000.0)
    inputs = {"x": _normal(rng, 1, seq, d), **_attn_inputs(rng, d, n_kv * hd)}
    return OpCase(lambda v: gqa_attention(v["x"], _attn(v), freqs), inputs)


def _block_case(rng) -> OpCase:
    hd, n_heads, n_kv, seq = _tiny_dims(rng)
    d = hd * n_heads
    f = int(rng.integers(d, 2 * d + 1))
    s = 1.0 / np.sqrt(d)
    freqs = rope_frequencies(head_dim=hd, max_seq=8, theta=10000.0)
    inputs = {"x": _normal(rng, 1, seq, d), **_attn_inputs(rng, d, n_kv * hd),
              "w1": _normal(rng, d, f, scale=s), "w3": _normal(rng, d, f, scale=s),
              "w2": _normal(rng, f, d, scale=s),
              "gamma_attn": _gain(rng, d), "gamma_ffn": _gain(rng, d)}

    def fn(v):
        block = BlockParams(_attn(v), FfnParams(v["w1"], v["w3"], v["w2"]), v["gamma_attn"], v["gamma_ffn"])
        return transformer_block(v["x"], block, freqs, 1e-6)

    return OpCase(fn, inputs)


CASES: dict[str, Callable[[np.random.Generator], OpCase]] = {
    "rms_norm": _rms_norm_case,
    "swiglu": _swiglu_case,
    "gqa_attention": _gqa_case,
    "transformer_block": _block_case,
}


@dataclass(frozen=True)
class GradcheckResult:
    op: str
    trials: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def to_dict(self) -> dict:
        return {"op": self.op, "trials": self.trials, "max_rel_error": self.max_rel_error,
                "tolerance": self.tolerance, "passed": self.passed}


def run_gradchecks(ops=None, trials: int = 20, seed: int = 0, tolerance: float = 1e-5) -> list[GradcheckResult]:
    names = list(CASES) if ops in (None, "all") else ([ops] if isinstance(ops, str) else list(ops))
    unknown = [n for n in names if n not in CASES]
    if unknown:
        raise KeyError(f"unknown op(s) {unknown}; choose from {sorted(CASES)}")
    results = []
    for i, name in enumerate(names):
        rng = np.random.default_rng([seed, i])
        worst = max(check_case(CASES[name](rng), rng) for _ in range(trials))
        results.append(GradcheckResult(name, trials, worst, tolerance))
    return results

