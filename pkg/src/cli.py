""" Command line driver: one subcommand per experiment, every output stamped with the resolved config

    python run.py expand --config configs/expand.yaml volume.N=2 model.beta=2
"""
import argparse
import math
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from omegaconf import DictConfig, OmegaConf

from src.dataloaders.boundary import build_ensemble
from src.dataloaders.census import CENSUS_MAX_N, load_census
from src.models.contour.contour import detect_interfaces, extract_contours
from src.models.functional.regions import exterior_sign
from src.models.ising import CouplingParams, constrained_logZ, exact_partition, transfer_matrix_logZ
from src.models.lattice import build_volume
from src.models.multiscale.aggregates import decompose_aggregates, unbalanced_contours
from src.models.multiscale.expansion import sequential_expansion
from src.models.multiscale.schedule import schedule_from_config
from src.models.multiscale.validators import Scenario, validate_inequalities
from src.models.sampler import MetropolisSampler, collect
from src.tasks import characteristic, llt
from src.tasks.corner import corner_split
from src.tasks.free_energy import free_energy_difference
from src.tasks.frequency import both_balls, empirical_frequency, phase_proxies
from src.tasks.interface import basic_est_experiment, interface_experiment, interface_summary, plot_trend
from src.tasks.metrics import sign_symmetry
from src.utils import registry
from src.utils.config import instantiate, load_config
from src.utils.errors import CapExceededError, RandBCError
from src.utils.experiment import get_logger, print_config, process_config, run_log, run_replicas, write_csv, write_json

log = get_logger(__name__)


def _params(config):
    return CouplingParams(beta=config.model.beta, lam=config.model.lam)


def _sampler_cfg(config):
    return OmegaConf.to_container(config.sampler)


def _census_or_none(config, N):
    if N > min(config.caps.census_max_n, CENSUS_MAX_N):
        return None
    return load_census(N, max_n=config.caps.census_max_n, progress=config.progress)


def _eta(config, N, replica=0):
    return build_ensemble(config.ensemble, seed=config.seed).sample(N, replica)


def _out(config, name) -> Path:
    return Path(config.out_dir) / name


# -- subcommands -----------------------------------------------------------------------


def simulate(config: DictConfig):
    """Exact log Z, log Z^+- and F for one boundary condition, plus Monte Carlo summaries when requested."""
    N = config.volume.N
    v, params, bc = build_volume(N), _params(config), _eta(config, N)
    result = {"N": N, "eta": bc.to_json()}
    if config.simulate.exact:
        if N == 1:
            result["log_Z"] = exact_partition(v, bc, params, max_sites=config.caps.enumeration_sites)
        else:
            result["log_Z"] = transfer_matrix_logZ(v, bc, params, max_width=config.caps.transfer_width)
        if _census_or_none(config, N) is not None or N == 1:
            log_zp, log_zm = constrained_logZ(v, bc, params, max_sites=config.caps.enumeration_sites, census_max_n=config.caps.census_max_n)
            result.update(log_Z_plus=log_zp, log_Z_minus=log_zm, F=log_zp - log_zm)
    if config.simulate.samples > 0:
        s = config.sampler
        sampler = MetropolisSampler(v, bc, params, seed=config.seed, chains=s.chains)
        sweeps = max(1, math.ceil(config.simulate.samples / s.chains)) * s.thin
        samples = collect(sampler.samples(sweeps, burn_in=s.burn_in, thin=s.thin, progress=config.progress))
        result["mc"] = {
            "samples": len(samples),
            "acceptance": sampler.acceptance,
            "magnetization": float(samples.mean()),
            "plus_fraction": float(np.mean(exterior_sign(samples, v) > 0)),
            "interface_fraction": float(detect_interfaces(samples, v).mean()),
        }
    write_json(_out(config, "simulate.json"), result, config)
    return result


def contours(config: DictConfig):
    """Contours of the last Metropolis sample and the unbalanced contours of the boundary condition."""
    N = config.volume.N
    v, params, bc = build_volume(N), _params(config), _eta(config, N)
    s = config.sampler
    sampler = MetropolisSampler(v, bc, params, seed=config.seed)
    sigma = sampler.sweep(s.burn_in + 1)[0]
    schedule = schedule_from_config(config, N)
    unbalanced = unbalanced_contours(v, bc.values, schedule, census=_census_or_none(config, N), max_length=config.caps.contour_length)
    result = {
        "sigma": sigma.tolist(),
        "contours": [c.to_json() for c in extract_contours(sigma, v)],
        "unbalanced": [c.to_json() for c in unbalanced],
    }
    write_json(_out(config, "contours.json"), result, config)
    return result


def expand(config: DictConfig):
    N = config.volume.N
    v, params, bc = build_volume(N), _params(config), _eta(config, N)
    census = _census_or_none(config, N)
    if census is None:
        raise CapExceededError(f"the exact expansion needs the census, available for N <= {config.caps.census_max_n}")
    report = sequential_expansion(
        v, bc, params, schedule_from_config(config, N), census=census,
        max_polymers=config.caps.polymers, max_size=config.caps.cluster_size,
    )
    result = report.to_json()
    log_zp, _ = census.constrained_log_partition(report.eta, params.beta, params.lam)
    result["exact_log_Z_plus"] = log_zp
    result["residual"] = report.log_Z - log_zp
    log.info(f"expansion log Z^+ = {report.log_Z:.12g}, exact {log_zp:.12g}")
    write_json(_out(config, "expand.json"), result, config)
    return result


def aggregates(config: DictConfig):
    N = config.volume.N
    v, bc = build_volume(N), _eta(config, N)
    schedule = schedule_from_config(config, N)
    unbalanced = unbalanced_contours(v, bc.values, schedule, census=_census_or_none(config, N), max_length=config.caps.contour_length)
    result = decompose_aggregates(unbalanced, schedule, v).to_json()
    write_json(_out(config, "aggregates.json"), result, config)
    return result


def freeenergy(config: DictConfig):
    """F per (N, replica), its sign-symmetry test and the empirical characteristic function."""
    fc, params = config.freeenergy, _params(config)
    ensemble = build_ensemble(config.ensemble, seed=config.seed)
    extra = dict(_sampler_cfg(config), seed=config.seed) if fc.method == "mc" else {
        "max_sites": config.caps.enumeration_sites, "census_max_n": config.caps.census_max_n,
    }
    rows = []
    for N in config.volume.Ns:
        v = build_volume(N)
        schedule = schedule_from_config(config, N)

        def run(r):
            bc = ensemble.sample(N, r)
            sample = free_energy_difference(v, bc, params, method=fc.method, replica=r, tag=bc.tag, **extra)
            row = {"N": N, "replica": r, **sample.to_json()}
            if fc.method == "exact":
                row["antisymmetry"] = sample.F + free_energy_difference(v, -bc, params, method="exact", **extra).F
            if fc.corner_split:
                census = _census_or_none(config, N)
                if census is None:
                    raise CapExceededError(f"the corner split needs the census, available for N <= {config.caps.census_max_n}")
                reports = [
                    sequential_expansion(v, bc, params, schedule, census=census, sign=sign,
                                         max_polymers=config.caps.polymers, max_size=config.caps.cluster_size)
                    for sign in (1, -1)
                ]
                split = corner_split(*reports, v, schedule, census)
                row.update(F_tilde=split.F_tilde, F_hat=split.F_hat, split_flagged=split.flagged)
            return row

        rows += run_replicas(run, range(fc.replicas), config.threads)
    df = pd.DataFrame(rows).drop(columns=["tag"])
    write_csv(_out(config, "freeenergy.csv"), df, config)

    summary, table = {}, []
    t = np.linspace(-fc.t_max, fc.t_max, fc.t_points)
    for N, group in df.groupby("N"):
        F = group.F[np.isfinite(group.F)].to_numpy()
        stat, p, symmetric = sign_symmetry(F)
        summary[int(N)] = {"mean": float(F.mean()) if len(F) else math.nan, "std": float(F.std()) if len(F) else math.nan,
                           "infinite": int((~np.isfinite(group.F)).sum()), "wilcoxon_p": p, "symmetric": symmetric}
        if "antisymmetry" in group:
            summary[int(N)]["max_antisymmetry"] = float(group.antisymmetry.abs().max())
        if len(F):
            psi = characteristic.characteristic_function(F, t)
            table += [{"N": int(N), **row} for row in characteristic.characteristic_table(t, psi, characteristic.baseline(t, params.beta))]
    if table:
        write_csv(_out(config, "characteristic.csv"), table, config)
    write_json(_out(config, "freeenergy.json"), summary, config)
    return summary


def frequency(config: DictConfig):
    """Q_N for the mu^+ and mu^- balls, and optionally the distance-to-phases table over volume.Ns."""
    fc, params = config.frequency, _params(config)
    ensemble = build_ensemble(config.ensemble, seed=config.seed)
    window = OmegaConf.to_container(fc.window)
    proxies = phase_proxies(fc.n_max, params, window, _sampler_cfg(config), seed=config.seed)
    curves = [
        empirical_frequency(
            ensemble, params, window, fc.radius, center=center, n_max=fc.n_max, replicas=fc.replicas,
            confidence=fc.confidence, sampler_cfg=_sampler_cfg(config), seed=config.seed, proxies=proxies,
            threads=config.threads,
        )
        for center in ("plus", "minus")
    ]
    merged = both_balls(curves)
    write_csv(_out(config, "frequency.csv"), merged, config)
    last = merged[merged.N == fc.n_max]
    result = {
        "n_max": fc.n_max,
        "Q_plus": float(last.Q_plus.mean()),
        "Q_minus": float(last.Q_minus.mean()),
        "Q_sum": float(last.Q_sum.mean()),
        "abstentions": int(last.abstentions_plus.sum() + last.abstentions_minus.sum()),
    }
    if fc.basic_est:
        df = basic_est_experiment(
            ensemble, params, config.volume.Ns, fc.replicas, fc.radius, window, _sampler_cfg(config),
            alpha=fc.alpha, seed=config.seed, proxies=proxies, threads=config.threads,
        )
        write_csv(_out(config, "basic_est.csv"), df, config)
        if fc.plot:
            plot_trend(df, _out(config, "basic_est.png"))
    write_json(_out(config, "frequency.json"), result, config)
    return result


def interface(config: DictConfig):
    ic, params = config.interface, _params(config)
    ensemble = build_ensemble(config.ensemble, seed=config.seed)
    control = build_ensemble({"_name_": ic.control}, seed=config.seed)
    df = interface_experiment(ensemble, control, params, config.volume.Ns, ic.replicas, _sampler_cfg(config), seed=config.seed, threads=config.threads)
    write_csv(_out(config, "interface.csv"), df, config)
    result = interface_summary(df)
    write_json(_out(config, "interface.json"), result, config)
    return result


def lltcheck(config: DictConfig):
    """The local limit bound on sums of independent +-1 variables against exact binomial probabilities."""
    lc = config.llt
    inp, p = llt.rademacher_fixture(lc.n, lc.a, lc.b, lc.delta_exponent, lc.tau, lc.grid_points)
    report = llt.llt_bound(inp, p, k=lc.k, slack=lc.slack)
    result = {"probability": p, **report.to_json()}
    exact = llt.rademacher_abs_integral(lc.n, lc.tau)
    if exact is not None:
        result["quadrature_error"] = abs(report.integral - exact)
    log.info(f"llt: {report.status}, margins {report.margins}")
    write_json(_out(config, "llt.json"), result, config)
    return result


def validate(config: DictConfig):
    """Runs the configured inequality checks on replica 0 of the ensemble at volume.N."""
    N, vc = config.volume.N, config.validate
    census = _census_or_none(config, N)
    scenario = Scenario(
        build_volume(N), _eta(config, N).values, _params(config), schedule_from_config(config, N), census=census,
        ensemble=build_ensemble(config.ensemble, seed=config.seed), seed=config.seed, samples=vc.eta_samples,
        max_polymers=config.caps.polymers, cluster_size=config.caps.cluster_size,
    )
    margins, skipped = validate_inequalities(scenario, vc.checks, constants=vc)
    result = {name: [m.to_json() for m in ms] for name, ms in margins.items()}
    summary = {"checks": result, "skipped": skipped, "all_hold": all(m["holds"] for ms in result.values() for m in ms)}
    write_json(_out(config, "validate.json"), summary, config)
    return summary


# -- entry point ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(description="Ising model under random boundary conditions")
    parser.add_argument("subcommand", choices=sorted(registry.subcommand), help="Experiment to run")
    parser.add_argument("--config", default=None, type=str, help="YAML experiment config")
    parser.add_argument("--seed", default=None, type=int, help="Master seed")
    parser.add_argument("--threads", default=None, type=int, help="Replica worker threads")
    parser.add_argument("--out-dir", default=None, type=str, help="Output directory")
    parser.add_argument("overrides", nargs="*", help="Dotlist overrides, e.g. model.beta=2.0")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    overrides = list(args.overrides)
    for key, value in (("seed", args.seed), ("threads", args.threads), ("out_dir", args.out_dir)):
        if value is not None:
            overrides.append(f"{key}={value}")
    try:
        config = process_config(load_config(args.config, overrides))
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with run_log(out_dir):
            print_config(config, out_dir, console=config.progress)
            instantiate(registry.subcommand, args.subcommand, config)
    except RandBCError as e:
        log.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    return 0
