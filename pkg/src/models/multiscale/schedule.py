""" Length scales of the multiscale decomposition """
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from src.utils.errors import DomainError

MAX_LEVELS = 64


@dataclass(frozen=True)
class ScaleSchedule:
    """Level n >= 1 lives at index n - 1 of `L` and `l`; `l_inf` is the corner scale of Lambda(N)."""

    l0: float
    epsilon: float
    N: int
    L: List[float] = field(default_factory=list)
    l: List[float] = field(default_factory=list)
    overridden: bool = False

    @property
    def levels(self):
        return len(self.L)

    @property
    def l_inf(self):
        return l_infinity(self.N, self.epsilon)

    def level(self, n):
        """(L_n, l_n)"""
        if not 1 <= n <= self.levels:
            raise DomainError(f"schedule has levels 1..{self.levels}, requested {n}")
        return self.L[n - 1], self.l[n - 1]

    def to_json(self):
        return {
            "l0": self.l0,
            "epsilon": self.epsilon,
            "N": self.N,
            "L": self.L,
            "l": self.l,
            "l_inf": self.l_inf,
            "overridden": self.overridden,
        }


def l_infinity(N, epsilon):
    if N < 1:
        raise DomainError(f"volume half-side must be >= 1, got {N}")
    return math.log(N) ** (1.0 + epsilon)


def build_schedule(
    l0: float,
    epsilon: float = 0.1,
    N: int = 1,
    L_overrides: Optional[Sequence[float]] = None,
    l_overrides: Optional[Sequence[float]] = None,
) -> ScaleSchedule:
    """L_n = l_{n-1} / 5^n and l_n = exp(L_n / 2^n), starting from l0.

    Levels are produced while L_n >= 1; the first level whose l_n overflows is kept with
    l_n = inf and closes the schedule. Overrides replace L_n (l_n) level by level, and the
    recurrence continues from the replaced values.
    """
    if l0 < 2:
        raise DomainError(f"l0 must be >= 2, got {l0}")
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    L_over, l_over = list(L_overrides or []), list(l_overrides or [])
    if any(x <= 0 for x in L_over + l_over):
        raise DomainError("scale overrides must be positive")
    Ls, ls = [], []
    prev = float(l0)
    for n in range(1, MAX_LEVELS + 1):
        forced = n <= max(len(L_over), len(l_over))
        L_n = L_over[n - 1] if n <= len(L_over) else prev / 5.0 ** n
        if not forced and not L_n >= 1.0:
            break
        if n <= len(l_over):
            l_n = float(l_over[n - 1])
        else:
            try:
                l_n = math.exp(L_n / 2.0 ** n)
            except OverflowError:
                l_n = math.inf
        Ls.append(float(L_n))
        ls.append(l_n)
        if math.isinf(l_n) or math.isinf(L_n):
            break
        prev = l_n
    return ScaleSchedule(l0=float(l0), epsilon=float(epsilon), N=int(N), L=Ls, l=ls, overridden=bool(L_over or l_over))


def schedule_from_config(config, N) -> ScaleSchedule:
    s = config.schedule
    return build_schedule(s.l0, s.epsilon, N, s.L_overrides, s.l_overrides)
