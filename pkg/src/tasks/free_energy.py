""" Random free-energy differences F^eta = log Z^{+,eta} - log Z^{+,-eta}

Spin flip maps Omega^+ under -eta onto Omega^- under eta, so Z^{+,-eta} = Z^{-,eta} and
both methods only ever look at the measure with boundary condition eta.
"""
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from src.models.functional.regions import exterior_sign
from src.models.ising import ENUMERATION_SITES, CouplingParams, as_eta, constrained_logZ
from src.models.lattice import Volume
from src.models.sampler import collect, metropolis_sampler
from src.tasks.metrics import batch_means, binomial_error, log_odds
from src.utils import registry
from src.utils.config import instantiate
from src.utils.experiment import get_logger

log = get_logger(__name__)


@dataclass
class FreeEnergySample:
    N: int
    F: float
    method: str
    error: float = 0.0
    tag: Optional[str] = None
    infinite: bool = False  # mc: one of the exterior classes was never visited
    samples: int = 0

    def to_json(self):
        return asdict(self)


def exact_free_energy(volume: Volume, eta, params: CouplingParams, max_sites=ENUMERATION_SITES, census_max_n=2, tag=None, **kwargs):
    """Exact F from enumeration (N = 1) or the census (N = 2)."""
    log_zp, log_zm = constrained_logZ(volume, eta, params, method="exact", max_sites=max_sites, census_max_n=census_max_n)
    return FreeEnergySample(N=volume.N, F=log_zp - log_zm, method="exact", tag=tag)


def mc_free_energy(
    volume: Volume,
    eta,
    params: CouplingParams,
    seed=0,
    replica=0,
    sweeps=2000,
    burn_in=200,
    thin=1,
    chains=8,
    batches=20,
    tag=None,
    progress=False,
    **kwargs,
):
    """F = log( mu(Omega^+) / mu(Omega^-) ) from Metropolis samples.

    The error is the delta-method error of the log-odds, with the standard error of the
    class frequency taken from batch means over each chain (never below the error of
    independent draws). A class with no visit gives F = +-inf and the `infinite` flag.
    """
    eta = as_eta(eta, volume)
    stream = metropolis_sampler(volume, eta, params, seed=seed, sweeps=sweeps, thin=thin, burn_in=burn_in, chains=chains, replica=replica)
    samples = collect(stream)
    signs = exterior_sign(samples, volume)
    # rows are (sweep, chain) in sweep-major order
    p, se = batch_means((signs > 0).reshape(-1, chains), batches=batches)
    if math.isfinite(se):
        se = max(se, binomial_error(p, len(signs)))
    F, err = log_odds(p, len(signs), error=se if math.isfinite(se) else None)
    infinite = not math.isfinite(F)
    if infinite:
        log.warning(f"N={volume.N}: only exterior sign {'+' if p > 0 else '-'} visited in {len(signs)} samples")
    return FreeEnergySample(N=volume.N, F=F, method="mc", error=err, tag=tag, infinite=infinite, samples=len(signs))


def free_energy_difference(volume: Volume, eta, params: CouplingParams, method="exact", **kwargs) -> FreeEnergySample:
    return instantiate(registry.free_energy, method, volume, eta, params, **kwargs)
