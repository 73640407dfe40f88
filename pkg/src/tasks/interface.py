""" Interface probabilities and the distance-to-phases experiment """
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd

from src.models.contour.contour import detect_interfaces
from src.models.ising import CouplingParams, as_eta
from src.models.lattice import Volume, build_volume
from src.models.sampler import collect, metropolis_sampler
from src.tasks.frequency import MarginalEstimate, distance, estimate_marginal, phase_proxies
from src.tasks.metrics import binomial_error, spearman_trend, wilson_interval
from src.utils.experiment import get_logger, run_replicas

log = get_logger(__name__)


@dataclass
class InterfaceEstimate:
    N: int
    p: float
    error: float
    samples: int
    tag: Optional[str] = None

    def to_json(self):
        return asdict(self)


def interface_probability(
    volume: Volume,
    eta,
    params: CouplingParams,
    seed=0,
    replica=0,
    sweeps=2000,
    burn_in=200,
    thin=1,
    chains=8,
    tag=None,
    **kwargs,
) -> InterfaceEstimate:
    """Fraction of Metropolis samples of mu^eta that contain an interface, with its binomial error."""
    stream = metropolis_sampler(volume, as_eta(eta, volume), params, seed=seed, sweeps=sweeps, thin=thin, burn_in=burn_in, chains=chains, replica=replica)
    samples = collect(stream)
    hits = detect_interfaces(samples, volume)
    p = float(hits.mean())
    return InterfaceEstimate(N=volume.N, p=p, error=binomial_error(p, len(hits)), samples=len(hits), tag=tag)


def uniform_interface_fraction(volume: Volume, samples: int, rng) -> float:
    """ Fraction of uniformly drawn configurations with an interface: the beta = 0 oracle """
    spins = (2 * rng.integers(0, 2, size=(samples, volume.n_sites), dtype=np.int8) - 1).astype(np.int8)
    return float(detect_interfaces(spins, volume).mean())


def reference_curve(Ns, alpha=0.0):
    """ N^{-1/2 + alpha}, for visual comparison only """
    return [float(n) ** (-0.5 + alpha) for n in Ns]


def basic_est_experiment(
    ensemble,
    params: CouplingParams,
    Ns: Sequence[int],
    replicas: int,
    epsilon: float,
    window,
    sampler_cfg=None,
    alpha=0.0,
    seed=0,
    proxies: Optional[Dict[str, MarginalEstimate]] = None,
    threads=1,
) -> pd.DataFrame:
    """Per volume, the fraction of eta replicas whose measure is at least epsilon away from both
    phase proxies in the X-seminorm, with Wilson intervals and the N^{-1/2+alpha} reference.
    """
    Ns = sorted(int(n) for n in Ns)
    if proxies is None:
        proxies = phase_proxies(Ns[-1], params, window, sampler_cfg, seed=seed)
    rows = []
    for N in Ns:

        def far(r):
            mu = estimate_marginal(N, ensemble.sample(N, r).values, params, window, sampler_cfg, seed=seed, replica=r)
            return min(distance(mu, proxies["plus"])[0], distance(mu, proxies["minus"])[0]) >= epsilon

        hits = int(np.sum(run_replicas(far, range(replicas), threads)))
        lo, hi = wilson_interval(hits, replicas)
        rows.append({"N": N, "replicas": replicas, "far": hits, "p": hits / replicas, "lo": lo, "hi": hi})
    df = pd.DataFrame(rows)
    df["reference"] = reference_curve(df.N, alpha)
    if len(df) >= 3:
        rho, pval, decreasing = spearman_trend(df.N, df.p)
        log.info(f"trend over N: spearman rho={rho:.3f} p={pval:.3g} decreasing={decreasing}")
    return df


def interface_experiment(ensemble, control, params: CouplingParams, Ns, replicas, sampler_cfg=None, seed=0, threads=1) -> pd.DataFrame:
    """One row per (N, replica) for the random ensemble, plus one control row per N (replica = -1)."""
    cfg = dict(sampler_cfg or {})
    rows = []
    for N in Ns:
        volume = build_volume(N)

        def run(r):
            bc = ensemble.sample(N, r)
            est = interface_probability(volume, bc.values, params, seed=seed, replica=r, tag=bc.tag, **cfg)
            return {"N": N, "replica": r, **est.to_json()}

        rows += run_replicas(run, range(replicas), threads)
        bc = control.sample(N, 0)
        est = interface_probability(volume, bc.values, params, seed=seed, replica=replicas, tag=bc.tag, **cfg)
        rows.append({"N": N, "replica": -1, **est.to_json()})
    return pd.DataFrame(rows).drop(columns=["tag"])


def interface_summary(df: pd.DataFrame) -> dict:
    """Median interface probability of the random replicas per N, the control, and the trend test."""
    random = df[df.replica >= 0]
    medians = random.groupby("N").p.median()
    control = df[df.replica < 0].set_index("N").p
    out = {
        "median": {int(n): float(m) for n, m in medians.items()},
        "control": {int(n): float(c) for n, c in control.items()},
        "control_ratio": {int(n): (float(control[n] / medians[n]) if medians[n] > 0 else math.inf) for n in medians.index},
    }
    if len(medians) >= 3:
        rho, p, decreasing = spearman_trend(random.N, random.p)
        out["trend"] = {"rho": rho, "p_value": p, "decreasing": decreasing}
    return out


def plot_trend(df: pd.DataFrame, path, y="p", reference="reference"):
    """log-log trend figure with the reference curve; written with the Agg backend."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4, 3))
    if {"lo", "hi"} <= set(df.columns):
        ax.errorbar(df.N, df[y], yerr=[df[y] - df.lo, df.hi - df[y]], fmt="o-", label="estimate")
    else:
        ax.plot(df.N, df[y], "o-", label="estimate")
    if reference in df.columns:
        ax.plot(df.N, df[reference], "--", label="reference")
    ax.set_xscale("log")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.set_xlabel("N")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path
