"""Figures rendered next to the CSV/JSON outputs of the CLI."""

from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..kvcache import MIB, MemoryEstimate  # noqa: E402
from ..training.loop import LossTrace  # noqa: E402


def figure_path(data_path: str | os.PathLike, suffix: str = ".png") -> Path:
    """``trace.csv`` -> ``trace.png`` in the same directory."""
    return Path(data_path).with_suffix(suffix)


def plot_loss_trace(trace: LossTrace, path: str | os.PathLike, reference: float | None = None) -> Path:
    fig, (ax_loss, ax_norm, ax_lr) = plt.subplots(3, 1, figsize=(6.4, 7.2), sharex=True)
    ax_loss.plot(trace.step, trace.loss, lw=0.8, color="#1f4e79")
    if reference is not None:
        ax_loss.axhline(reference, ls="--", lw=0.8, color="gray", label="unigram entropy")
        ax_loss.legend(loc="upper right", frameon=False)
    ax_loss.set_ylabel("loss (nats)")
    ax_norm.plot(trace.step, trace.grad_norm, lw=0.8, color="#a33")
    ax_norm.set_ylabel("grad norm (pre-clip)")
    ax_lr.plot(trace.step, trace.lr, lw=0.8, color="#333")
    ax_lr.set_ylabel("learning rate")
    ax_lr.set_xlabel("step")
    for ax in (ax_loss, ax_norm, ax_lr):
        ax.grid(alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_memory(estimates: list[MemoryEstimate], path: str | os.PathLike) -> Path:
    """Stacked weights / kv-cache / activations bars, one per estimate."""
    labels = [e.attention_kind.upper() for e in estimates]
    parts = [("weights", [e.weights_bytes / MIB for e in estimates]),
             ("kv cache", [e.kv_cache_bytes_total / MIB for e in estimates]),
             ("activations", [e.activations_bytes / MIB for e in estimates])]
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    bottom = [0.0] * len(estimates)
    for name, vals in parts:
        ax.bar(labels, vals, bottom=bottom, label=name)
        bottom = [b + v for b, v in zip(bottom, vals)]
    ax.set_ylabel("MiB")
    e = estimates[0]
    ax.set_title(f"batch {e.batch}, seq {e.seq}, {e.dtype_bytes}-byte values", fontsize=10)
    ax.legend(frameon=False)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
