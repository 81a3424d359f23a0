from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class Schedule:
    lr_max: float = 6e-4
    lr_min: float = 6e-5
    warmup_steps: int = 2000
    lr_decay_steps: int = 600_000

    def __post_init__(self):
        if not 0 < self.lr_min <= self.lr_max:
            raise ConfigError("need 0 < lr_min <= lr_max")
        if not 0 < self.warmup_steps < self.lr_decay_steps:
            raise ConfigError("need 0 < warmup_steps < lr_decay_steps")


def lr_at(t: float, s: Schedule = Schedule()) -> float:
    """Linear warmup from zero, cosine decay to ``lr_min``, then held at ``lr_min``."""
    if t < 0:
        raise ConfigError("step must be non-negative")
    if t <= s.warmup_steps:
        return s.lr_max * t / s.warmup_steps
    if t > s.lr_decay_steps:
        return s.lr_min
    decay_ratio = (t - s.warmup_steps) / (s.lr_decay_steps - s.warmup_steps)
    return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + math.cos(math.pi * decay_ratio))
