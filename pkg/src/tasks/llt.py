""" Upper local limit bound from a characteristic function

Given psi_n on a grid covering [-tau_n, tau_n] and positive A_n, delta_n, tau_n:

  i)   A_n int_{-tau_n}^{tau_n} |psi_n(t)| dt <= 2 pi
  ii)  A_n / (delta_n^k tau_n^(k-1))  small (a limit statement, reported as a number)

then (A_n / delta_n) P{a delta_n <= X_n <= b delta_n} <= b - a up to vanishing corrections.
At a single n the conclusion is compared against (b - a)(1 + slack).
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln

from src.models.multiscale.validators import Margin
from src.utils.errors import CapExceededError, DomainError

# the grid step may be at most tau / STEP_RATIO
STEP_RATIO = 1000
TOL = 1e-12

PREMISE_FAILED = "premise failed"


@dataclass
class LLTInput:
    t: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    A: float
    delta: float
    tau: float
    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.float64)
        self.psi = np.asarray(self.psi)
        if self.t.shape != self.psi.shape or self.t.ndim != 1 or len(self.t) < 2:
            raise DomainError("t grid and psi values must be 1-d arrays of equal length >= 2")
        if min(self.A, self.delta, self.tau) <= 0:
            raise DomainError("A, delta and tau must be strictly positive")
        if self.b <= self.a:
            raise DomainError(f"empty interval ({self.a}, {self.b})")
        if (np.abs(self.psi) > 1 + 1e-9).any():
            raise DomainError("a characteristic function is bounded by 1 in modulus")
        if np.any(np.diff(self.t) <= 0):
            raise DomainError("t grid must be strictly increasing")


@dataclass
class LLTReport:
    premise_i: Margin
    premise_ii: float
    conclusion: Margin
    integral: float
    status: str

    @property
    def margins(self):
        return {"premise_i": self.premise_i.margin, "premise_ii": self.premise_ii, "conclusion": self.conclusion.margin}

    def to_json(self):
        out = asdict(self)
        out["margins"] = self.margins
        return out


def abs_integral(inp: LLTInput) -> float:
    """ trapezoid rule for int_{-tau}^{tau} |psi| over the grid points inside [-tau, tau] """
    t, psi = inp.t, inp.psi
    if t[0] > -inp.tau + TOL or t[-1] < inp.tau - TOL:
        raise DomainError(f"t grid [{t[0]:.6g}, {t[-1]:.6g}] does not cover [-{inp.tau:.6g}, {inp.tau:.6g}]")
    sel = (t >= -inp.tau - TOL) & (t <= inp.tau + TOL)
    step = float(np.diff(t[sel]).max())
    if step > inp.tau / STEP_RATIO:
        raise CapExceededError(f"quadrature step {step:.3g} exceeds tau/{STEP_RATIO} = {inp.tau / STEP_RATIO:.3g}")
    return float(integrate.trapezoid(np.abs(psi[sel]), t[sel]))


def llt_bound(inp: LLTInput, probability: float, k: float = 2.0, slack: float = 0.1) -> LLTReport:
    """Evaluates both premises and, when premise i holds, the bound on the interval probability."""
    if not 0.0 <= probability <= 1.0:
        raise DomainError(f"probability out of range: {probability}")
    integral = abs_integral(inp)
    premise_i = Margin("premise_i", "A int |psi|", inp.A * integral, 2 * math.pi)
    premise_ii = inp.A / (inp.delta**k * inp.tau ** (k - 1))
    conclusion = Margin("conclusion", "A/delta P", inp.A / inp.delta * probability, (inp.b - inp.a) * (1 + slack))
    if not premise_i.holds:
        status = PREMISE_FAILED
    else:
        status = "holds" if conclusion.holds else "violated"
    return LLTReport(premise_i, premise_ii, conclusion, integral, status)


def rademacher_psi(t, n) -> np.ndarray:
    """ characteristic function of a sum of n independent +-1 variables """
    return np.cos(np.asarray(t, dtype=np.float64)) ** n


def rademacher_probability(n, lo, hi) -> float:
    """ P{lo <= X_n <= hi} exactly, X_n = 2 K - n with K ~ Binomial(n, 1/2) """
    k_lo = math.ceil((n + lo) / 2)
    k_hi = math.floor((n + hi) / 2)
    if k_hi < k_lo:
        return 0.0
    dist = stats.binom(n, 0.5)
    return float(dist.cdf(k_hi) - dist.cdf(k_lo - 1))


def rademacher_abs_integral(n, tau=math.pi / 2) -> Optional[float]:
    """ int_{-pi/2}^{pi/2} cos^n = sqrt(pi) Gamma((n+1)/2) / Gamma(n/2 + 1); None for other tau """
    if not math.isclose(tau, math.pi / 2):
        return None
    return math.exp(0.5 * math.log(math.pi) + gammaln((n + 1) / 2) - gammaln(n / 2 + 1))


def rademacher_fixture(n=10000, a=-1.0, b=1.0, delta_exponent=0.3, tau=math.pi / 2, grid_points=20001):
    """ (LLTInput, exact interval probability) with A_n = sqrt(2 pi n) and delta_n = n^delta_exponent """
    t = np.linspace(-tau, tau, grid_points)
    delta = float(n) ** delta_exponent
    inp = LLTInput(t=t, psi=rademacher_psi(t, n), A=math.sqrt(2 * math.pi * n), delta=delta, tau=tau, a=a, b=b)
    return inp, rademacher_probability(n, a * delta, b * delta)
