from __future__ import annotations

from dataclasses import dataclass

from ..errors import DomainError


@dataclass(frozen=True)
class ScalingLawParams:
    N: float
    D: float
    a: float = 6.12
    b: float = 138.7
    alpha: float = 0.39
    c: float = 5.21
    beta: float = 0.52


def scaling_law_loss(p: ScalingLawParams) -> float:
    """``a + b / N**alpha + c / D**beta``, N parameters and D training tokens.

    The default constants are used as given; at N = 6.5e8, D = 1e11 the law
    evaluates to about 6.17.
    """
    if not (p.N > 0 and p.D > 0):
        raise DomainError("N and D must be positive")
    return p.a + p.b / p.N ** p.alpha + p.c / p.D ** p.beta
