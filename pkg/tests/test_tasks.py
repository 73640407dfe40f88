import math

import numpy as np
import pytest

from src.dataloaders.boundary import ConstantBC, FrozenCornersBC, RandomBC
from src.models.ising import CouplingParams, constrained_logZ
from src.models.lattice import build_volume
from src.models.multiscale.expansion import sequential_expansion
from src.models.multiscale.schedule import build_schedule
from src.tasks import characteristic, llt
from src.tasks.corner import corner_split
from src.tasks.free_energy import exact_free_energy, free_energy_difference, mc_free_energy
from src.tasks.frequency import MarginalEstimate, empirical_frequency, membership, sparse_volumes
from src.tasks.interface import interface_summary, reference_curve, uniform_interface_fraction
from src.tasks.metrics import batch_means, binomial_error, log_odds, sign_symmetry, spearman_trend, wilson_interval
from src.utils.errors import CapExceededError, DomainError
from src.utils.rng import generator

# -- metrics ------------------------------------------------------------------------


def test_wilson_interval():
    lo, hi = wilson_interval(0, 10)
    assert lo == 0.0 and 0 < hi < 0.35
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi


def test_log_odds():
    value, err = log_odds(0.5, 100)
    assert value == 0.0 and err == pytest.approx(0.2)
    value, err = log_odds(1.0, 100)
    assert value == math.inf and math.isnan(err)


def test_batch_means():
    mean, err = batch_means(np.full((40, 3), 0.25))
    assert mean == pytest.approx(0.25) and err == pytest.approx(0.0)
    # two chains, two blocks each: block means 0, 1, 2, 3
    x = np.array([[0, 2], [0, 2], [1, 3], [1, 3]], dtype=float)
    mean, err = batch_means(x, batches=2)
    assert mean == pytest.approx(1.5)
    assert err == pytest.approx(np.std([0, 1, 2, 3], ddof=1) / 2)
    # incomplete trailing block is dropped
    assert batch_means(np.array([1.0, 1.0, 5.0]), batches=2)[0] == pytest.approx(1.0)
    assert math.isnan(batch_means(np.ones(1))[1])
    with pytest.raises(DomainError):
        batch_means(np.zeros((0, 2)))


def test_spearman_trend():
    rho, p, decreasing = spearman_trend(range(10), np.arange(10)[::-1])
    assert rho == pytest.approx(-1.0) and decreasing
    assert spearman_trend([1, 2, 3], [0.5, 0.5, 0.5]) == (0.0, 1.0, False)
    with pytest.raises(DomainError):
        spearman_trend([1, 2], [1, 2])


def test_sign_symmetry():
    values = np.concatenate([np.arange(1, 21), -np.arange(1, 21)]).astype(float)
    assert sign_symmetry(values)[2]
    assert not sign_symmetry(np.arange(1, 31, dtype=float))[2]


# -- free energy --------------------------------------------------------------------


def test_exact_free_energy(v1, random_eta):
    params = CouplingParams(1.0)
    assert exact_free_energy(v1, np.ones(12), params).F > 0
    eta = random_eta(v1, 0)
    F = exact_free_energy(v1, eta, params).F
    assert exact_free_energy(v1, -eta, params).F == pytest.approx(-F, abs=1e-10)
    lzp, lzm = constrained_logZ(v1, eta, params)
    assert F == pytest.approx(lzp - lzm)


def test_free_energy_dispatch(v1):
    sample = free_energy_difference(v1, np.ones(12), CouplingParams(1.0), method="exact")
    assert sample.method == "exact" and sample.N == 1


@pytest.mark.parametrize("beta,seed", [(0.1, 0), (0.3, 1)])
def test_mc_free_energy(v1, random_eta, beta, seed):
    params = CouplingParams(beta)
    eta = random_eta(v1, seed)
    exact = exact_free_energy(v1, eta, params).F
    mc = mc_free_energy(v1, eta, params, seed=seed, sweeps=4000, chains=8)
    assert not mc.infinite and mc.samples == 4000 * 8
    assert mc.error > 0
    assert abs(mc.F - exact) <= 3 * mc.error


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1])
def test_mc_free_energy_n2(v2, census2, random_eta, seed):
    params = CouplingParams(0.2)
    eta = random_eta(v2, seed)
    exact = exact_free_energy(v2, eta, params).F
    mc = mc_free_energy(v2, eta, params, seed=seed, sweeps=4000, chains=8)
    assert not mc.infinite
    assert abs(mc.F - exact) <= 3 * mc.error


def test_mc_error_not_below_independent_draws(v1):
    params = CouplingParams(0.1)
    mc = mc_free_energy(v1, np.ones(12), params, sweeps=400, chains=4)
    p = 1.0 / (1.0 + math.exp(-mc.F))
    assert mc.error >= binomial_error(p, mc.samples) / (p * (1 - p)) - 1e-12


def test_mc_free_energy_empty_cell(v1):
    mc = mc_free_energy(v1, np.ones(12), CouplingParams(3.0), sweeps=50, burn_in=50, chains=2)
    assert mc.infinite and mc.F == math.inf


# -- characteristic functions --------------------------------------------------------


def test_characteristic_function():
    t = characteristic.grid(2.0, 41)
    assert np.allclose(characteristic.characteristic_function(np.zeros(5), t), 1.0)
    rng = np.random.default_rng(0)
    psi = characteristic.characteristic_function(rng.normal(size=50), t)
    assert psi[20] == pytest.approx(1.0)
    assert (np.abs(psi) <= 1 + 1e-12).all()
    with pytest.raises(DomainError):
        characteristic.characteristic_function([], t)


def test_field_baseline():
    beta = 0.7
    t = characteristic.grid(3.0, 61)
    samples = [characteristic.field_free_energy([s], beta) for s in (-1, 1)]
    psi = characteristic.characteristic_function(samples, t)
    assert np.allclose(psi, characteristic.baseline(t, beta))
    assert characteristic.within(psi, characteristic.product_baseline(t, beta, 1), 1e-12)
    assert characteristic.symmetry_margin(psi, 1e-12).holds


def test_free_sites(v2):
    assert characteristic.free_sites(v2, 0.0) == 12
    assert characteristic.free_sites(v2, 0.5) == 4


def test_gaussian_bound():
    t = characteristic.grid(1.0, 21)
    margins = characteristic.gaussian_bound_margins(np.cos(t) ** 50, t, 1.0, 50, t0=0.55)
    assert len(margins) == 11
    assert all(m.holds for m in margins)


def test_sampled_free_energies(v1):
    ens = FrozenCornersBC(seed=3, radius=0.0)
    F = characteristic.sample_free_energies(lambda eta: exact_free_energy(v1, eta, CouplingParams(1.0)).F, ens, 1, 6)
    assert F.shape == (6,)
    assert np.isfinite(F).all()


# -- local limit bound -----------------------------------------------------------------


def test_rademacher_fixture():
    inp, p = llt.rademacher_fixture()
    report = llt.llt_bound(inp, p)
    assert report.premise_i.holds
    assert 0 < report.premise_i.margin < 1e-3
    assert report.conclusion.lhs == pytest.approx(1.89, abs=0.02)
    assert report.conclusion.holds
    assert report.status == "holds"
    assert abs(report.integral - llt.rademacher_abs_integral(10000)) < 1e-8


def test_llt_premise_failed():
    inp, p = llt.rademacher_fixture()
    doubled = llt.LLTInput(t=inp.t, psi=inp.psi, A=2 * inp.A, delta=inp.delta, tau=inp.tau)
    report = llt.llt_bound(doubled, p)
    assert report.status == llt.PREMISE_FAILED
    assert report.premise_i.margin < 0


def test_llt_violated():
    inp, _ = llt.rademacher_fixture()
    assert llt.llt_bound(inp, 1.0).status == "violated"


def test_llt_grid_checks():
    with pytest.raises(CapExceededError):
        llt.llt_bound(llt.rademacher_fixture(grid_points=101)[0], 0.1)
    t = np.linspace(-1.0, 1.0, 5001)
    inp = llt.LLTInput(t=t, psi=np.cos(t), A=1.0, delta=1.0, tau=math.pi / 2)
    with pytest.raises(DomainError):
        llt.abs_integral(inp)
    with pytest.raises(DomainError):
        llt.LLTInput(t=t, psi=np.cos(t), A=0.0, delta=1.0, tau=1.0)
    with pytest.raises(DomainError):
        llt.llt_bound(llt.rademacher_fixture()[0], 1.5)


def test_rademacher_probability():
    assert llt.rademacher_probability(2, -2, 2) == pytest.approx(1.0)
    assert llt.rademacher_probability(2, -0.5, 0.5) == pytest.approx(0.5)
    assert llt.rademacher_probability(3, -0.5, 0.5) == 0.0


# -- frequencies ---------------------------------------------------------------------


def test_sparse_volumes():
    assert sparse_volumes(2, 0.0, 3) == [2, 4, 16]
    with pytest.raises(DomainError):
        sparse_volumes(1, 0.0, 3)


def test_membership_extremes():
    mu = MarginalEstimate(np.array([0.5, 0.5]), 100)
    nu = MarginalEstimate(np.array([1.0, 0.0]), math.inf)
    assert membership(mu, nu, math.inf) is True
    assert membership(mu, nu, -1.0) is False
    assert membership(nu, nu, 0.0) is True
    assert membership(mu, nu, 0.99) is None


def test_frequency_whole_space():
    df = empirical_frequency(ConstantBC(value=1), CouplingParams(1.0), [(0, 0)], math.inf, n_max=1, replicas=2)
    assert (df.Q == 1.0).all()
    df = empirical_frequency(RandomBC(seed=1), CouplingParams(1.0), [(0, 0)], -1.0, n_max=1, replicas=2)
    assert (df.Q == 0.0).all()


def test_frequency_exact_membership():
    # N = 1 marginals are exact, so membership is always decided
    df = empirical_frequency(ConstantBC(value=1), CouplingParams(1.0), [(0, 0)], 0.1, n_max=1, replicas=1)
    assert df.member.tolist() == [1]
    assert df.abstentions.tolist() == [0]


# -- interfaces ------------------------------------------------------------------------


def test_uniform_interface_fraction(v2):
    p = uniform_interface_fraction(v2, 2000, generator(0, 1))
    assert 0.0 < p < 1.0


def test_reference_curve():
    assert reference_curve([4, 16]) == [0.5, 0.25]


def test_interface_summary():
    import pandas as pd

    rows = [{"N": n, "replica": r, "p": 1.0 / n} for n in (4, 8, 12) for r in range(3)]
    rows += [{"N": n, "replica": -1, "p": 0.5} for n in (4, 8, 12)]
    out = interface_summary(pd.DataFrame(rows))
    assert out["median"][4] == pytest.approx(0.25)
    assert out["control_ratio"][8] == pytest.approx(4.0)
    assert out["trend"]["rho"] < 0


# -- corner split ---------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_corner_split_is_exact(v1, census1, schedule1, random_eta, seed):
    eta = random_eta(v1, seed)
    params = CouplingParams(2.0)
    pos = sequential_expansion(v1, eta, params, schedule1, census=census1)
    neg = sequential_expansion(v1, eta, params, schedule1, census=census1, sign=-1)
    split = corner_split(pos, neg, v1, schedule1, census1)
    assert abs(split.residual) < 1e-9
    assert split.F == pytest.approx(exact_free_energy(v1, eta, params).F, abs=1e-9)
    assert split.to_json()["residual"] == split.residual


def test_corner_split_needs_opposite_reports(v1, census1, schedule1, random_eta):
    eta = random_eta(v1, 0)
    pos = sequential_expansion(v1, eta, CouplingParams(2.0), schedule1, census=census1)
    with pytest.raises(DomainError):
        corner_split(pos, pos, v1, schedule1, census1)


@pytest.mark.slow
def test_corner_split_n2(v2, census2):
    eta = RandomBC(seed=5).sample(2).values
    params = CouplingParams(2.0)
    schedule = build_schedule(5.0, 0.1, 2)
    pos = sequential_expansion(v2, eta, params, schedule, census=census2)
    neg = sequential_expansion(v2, eta, params, schedule, census=census2, sign=-1)
    split = corner_split(pos, neg, build_volume(2), schedule, census2)
    assert abs(split.residual) < 1e-8
    lzp, lzm = census2.constrained_log_partition(eta, 2.0)
    assert split.F == pytest.approx(lzp - lzm, abs=1e-8)
