""" Empirical frequencies of finite-volume Gibbs states near the pure phases

Q_N^{B,eta} = (1/N) sum_{k <= N} 1{ mu_{Lambda(k)}^eta in B }

B is a ball {mu : ||mu - center||_X <= radius} around a proxy of mu^+ or mu^- (the
finite-volume measure with eta = +-1 at the largest volume of the run). Measures are
compared through their X-marginals; sampled marginals carry an error and membership is
only decided when the ball boundary is `confidence` standard errors away.
"""
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from src.models.ising import CouplingParams, exact_marginal, marginal_pmf, window_sites
from src.models.lattice import build_volume
from src.models.sampler import collect, metropolis_sampler
from src.utils.errors import DomainError
from src.utils.experiment import get_logger, run_replicas

log = get_logger(__name__)

EXACT_MAX_N = 1


@dataclass
class MarginalEstimate:
    """X-marginal of a measure. samples = inf for exactly computed marginals."""

    pmf: np.ndarray
    samples: float

    @property
    def exact(self):
        return math.isinf(self.samples)

    def stderr(self) -> np.ndarray:
        if self.exact:
            return np.zeros_like(self.pmf)
        return np.sqrt(self.pmf * (1 - self.pmf) / max(self.samples, 1))


def estimate_marginal(N, eta, params: CouplingParams, window, sampler_cfg=None, seed=0, replica=0) -> MarginalEstimate:
    """X-marginal of mu_{Lambda(N)}^eta: exact for N = 1, from Metropolis samples beyond."""
    volume = build_volume(N)
    sites = window_sites(volume, window)
    if N <= EXACT_MAX_N:
        return MarginalEstimate(exact_marginal(volume, eta, params, sites), math.inf)
    cfg = dict(sampler_cfg or {})
    stream = metropolis_sampler(
        volume,
        eta,
        params,
        seed=seed,
        sweeps=cfg.get("sweeps", 2000),
        thin=cfg.get("thin", 1),
        burn_in=cfg.get("burn_in", 200),
        chains=cfg.get("chains", 8),
        replica=replica,
    )
    samples = collect(stream)
    return MarginalEstimate(marginal_pmf(samples, sites), len(samples))


def phase_proxies(N, params: CouplingParams, window, sampler_cfg=None, seed=0) -> Dict[str, MarginalEstimate]:
    """ mu^+ and mu^- stand-ins: the measures with eta = +1 and eta = -1 on Lambda(N) """
    M = 4 * (2 * N + 1)
    return {
        name: estimate_marginal(N, np.full(M, value, dtype=np.int8), params, window, sampler_cfg, seed=seed, replica=-1 - i)
        for i, (name, value) in enumerate((("plus", 1), ("minus", -1)))
    }


def distance(mu: MarginalEstimate, nu: MarginalEstimate):
    """ L1 distance of two marginals and its standard error (cellwise errors added) """
    d = float(np.abs(mu.pmf - nu.pmf).sum())
    err = float(np.sqrt(mu.stderr() ** 2 + nu.stderr() ** 2).sum())
    return d, err


def membership(mu: MarginalEstimate, center: MarginalEstimate, radius: float, confidence=2.0) -> Optional[bool]:
    """Whether mu lies in the ball of `radius` around center; None when undecided.

    radius = inf is the whole space and radius < 0 the empty ball.
    """
    if math.isinf(radius) and radius > 0:
        return True
    if radius < 0:
        return False
    d, err = distance(mu, center)
    if d + confidence * err <= radius:
        return True
    if d - confidence * err > radius:
        return False
    return None


def empirical_frequency(
    ensemble,
    params: CouplingParams,
    window,
    radius: float,
    center="plus",
    n_max=8,
    replicas=1,
    confidence=2.0,
    sampler_cfg=None,
    seed=0,
    proxies=None,
    threads=1,
) -> pd.DataFrame:
    """Q_N curves, one per eta replica.

    Replica r reads its boundary condition at volume k from ensemble.sample(k, r).
    Undecided memberships count as outside and are reported in the `abstentions` column.
    """
    if n_max < 1:
        raise DomainError(f"n_max must be >= 1, got {n_max}")
    # smallest volume that contains the window
    start = max(1, max(max(abs(int(x)), abs(int(y))) for x, y in window))
    if proxies is None:
        proxies = phase_proxies(n_max, params, window, sampler_cfg, seed=seed)
    ball = proxies[center]

    def curve(r):
        rows, hits, abstained = [], 0, 0
        for k in range(1, n_max + 1):
            if k < start:
                member = None
            else:
                eta = ensemble.sample(k, r).values
                mu = estimate_marginal(k, eta, params, window, sampler_cfg, seed=seed, replica=r)
                member = membership(mu, ball, radius, confidence)
            hits += member is True
            abstained += member is None
            rows.append({"replica": r, "N": k, "member": -1 if member is None else int(member), "Q": hits / k, "abstentions": abstained})
        return rows

    rows = [row for rows in run_replicas(curve, range(replicas), threads) for row in rows]
    df = pd.DataFrame(rows)
    log.info(f"Q_{n_max} over {replicas} replicas: mean {df[df.N == n_max].Q.mean():.3f} ({center} ball, radius {radius})")
    return df


def sparse_volumes(k1: int, omega: float, count: int) -> List[int]:
    """Volume sizes with k_{n+1} >= k_n^{2 + omega}: a sparse subsequence for chaotic size dependence runs."""
    if k1 < 2 or omega < 0 or count < 1:
        raise DomainError("need k1 >= 2, omega >= 0 and count >= 1")
    ks = [int(k1)]
    while len(ks) < count:
        ks.append(int(math.ceil(ks[-1] ** (2 + omega))))
    return ks


def both_balls(curves: Sequence[pd.DataFrame]) -> pd.DataFrame:
    """ Q(mu+ ball) + Q(mu- ball) per (replica, N) """
    plus, minus = curves
    merged = plus.merge(minus, on=["replica", "N"], suffixes=("_plus", "_minus"))
    merged["Q_sum"] = merged.Q_plus + merged.Q_minus
    return merged
