import math

import numpy as np
import pytest

from src.models.ising import (
    BoundaryCondition,
    CouplingParams,
    LocalObservable,
    as_eta,
    constrained_logZ,
    constrained_split,
    exact_marginal,
    exact_partition,
    hamiltonian,
    mixture_decomposition_check,
    seminorm_distance,
    transfer_matrix_logZ,
)
from src.models.functional.enumerate import as_grid, unpack_spins
from src.models.sampler import collect, metropolis_sampler
from src.utils.errors import CapExceededError, DomainError
from tests.conftest import spins_with


def plus(volume):
    return np.ones(volume.n_boundary, dtype=np.int8)


def test_params_ranges():
    CouplingParams(beta=0.0)
    with pytest.raises(DomainError):
        CouplingParams(beta=-1.0)
    with pytest.raises(DomainError):
        CouplingParams(beta=1.0, lam=1.5)


def test_boundary_condition():
    bc = BoundaryCondition(np.ones(20, dtype=np.int8), tag="plus")
    assert bc.N == 2
    assert (-bc).values.sum() == -20
    assert BoundaryCondition.from_json(bc.to_json()) == bc
    with pytest.raises(DomainError):
        BoundaryCondition(np.ones(16))
    with pytest.raises(DomainError):
        BoundaryCondition(np.zeros(12))


def test_hamiltonian(v1, params):
    sigma = np.ones(v1.n_sites, dtype=np.int8)
    assert hamiltonian(sigma, plus(v1), v1, params) == pytest.approx(-12)
    assert hamiltonian(sigma, -plus(v1), v1, params) == pytest.approx(12)
    assert hamiltonian(spins_with(v1, [(0, 0)]), plus(v1), v1, params) == pytest.approx(-4)


def test_hamiltonian_rejects_bad_shapes(v1, params):
    with pytest.raises(DomainError):
        hamiltonian(np.ones(8), plus(v1), v1, params)
    with pytest.raises(DomainError):
        hamiltonian(np.ones(9), np.ones(10), v1, params)


def test_infinite_temperature(v1):
    assert exact_partition(v1, plus(v1), CouplingParams(beta=1e-12)) == pytest.approx(9 * math.log(2), abs=1e-9)
    assert exact_partition(v1, plus(v1), CouplingParams(beta=0.0)) == pytest.approx(9 * math.log(2), abs=1e-12)


def test_transfer_matches_enumeration(v1, random_eta):
    params = CouplingParams(beta=0.7)
    for seed in range(50):
        eta = random_eta(v1, seed)
        assert transfer_matrix_logZ(v1, eta, params) == pytest.approx(exact_partition(v1, eta, params), abs=1e-10)
    assert transfer_matrix_logZ(v1, plus(v1), CouplingParams(1.0)) == pytest.approx(exact_partition(v1, plus(v1), CouplingParams(1.0)), abs=1e-10)


def test_transfer_large_beta(v1, v2, random_eta):
    # all-plus ground state: no broken bonds and every boundary bond satisfied
    for beta in (10.0, 60.0, 100.0):
        assert transfer_matrix_logZ(v2, plus(v2), CouplingParams(beta)) == pytest.approx(20 * beta, rel=1e-12)
    params = CouplingParams(beta=100.0)
    for seed in range(5):
        eta = random_eta(v1, seed)
        assert transfer_matrix_logZ(v1, eta, params) == pytest.approx(exact_partition(v1, eta, params), abs=1e-8)


def test_transfer_flip_symmetry(v2):
    params = CouplingParams(beta=0.9, lam=0.5)
    assert transfer_matrix_logZ(v2, plus(v2), params) == pytest.approx(transfer_matrix_logZ(v2, -plus(v2), params), abs=1e-10)
    assert transfer_matrix_logZ(v2, plus(v2), CouplingParams(0.0)) == pytest.approx(25 * math.log(2), abs=1e-10)


def test_enumeration_cap(v2, params):
    with pytest.raises(CapExceededError):
        exact_partition(v2, plus(v2), params, max_sites=9)


def test_exterior_sign(v1):
    assert constrained_split(np.ones(9), v1) == 1
    assert constrained_split(-np.ones(9), v1) == -1
    assert constrained_split(spins_with(v1, [(0, 0)]), v1) == 1


def test_constrained_split_sums(v1, params, random_eta):
    eta = plus(v1)
    lzp, lzm = constrained_logZ(v1, eta, params)
    assert lzp > lzm
    assert np.logaddexp(lzp, lzm) == pytest.approx(exact_partition(v1, eta, params), abs=1e-10)
    eta = random_eta(v1, 3)
    lzp, lzm = constrained_logZ(v1, eta, params)
    # conjugation: Z^{-, eta} = Z^{+, -eta}
    assert constrained_logZ(v1, -eta, params)[0] == pytest.approx(lzm, abs=1e-10)


def test_constrained_mc(v1, params):
    samples = np.ones((10, v1.n_sites), dtype=np.int8)
    lzp, lzm = constrained_logZ(v1, plus(v1), params, method="mc", samples=samples)
    assert lzm == -np.inf
    assert lzp == pytest.approx(transfer_matrix_logZ(v1, plus(v1), params))
    with pytest.raises(DomainError):
        constrained_logZ(v1, plus(v1), params, method="mc")


def test_mixture_decomposition(v1, params, random_eta):
    origin = LocalObservable.spin(v1.site_index(0, 0))
    assert mixture_decomposition_check(v1, plus(v1), params, origin) < 1e-10
    assert mixture_decomposition_check(v1, random_eta(v1, 1), params, origin) < 1e-10
    assert mixture_decomposition_check(v1, plus(v1), params, LocalObservable.constant()) < 1e-12


def test_mixture_without_boundary_coupling(v1, random_eta):
    params = CouplingParams(beta=1.0, lam=0.0)
    eta = random_eta(v1, 2)
    origin = LocalObservable.spin(v1.site_index(0, 0))
    assert mixture_decomposition_check(v1, eta, params, origin) < 1e-10
    pmf = exact_marginal(v1, eta, params, origin.window)
    assert pmf[0] == pytest.approx(0.5, abs=1e-12)


def test_seminorm(v1):
    window = (v1.site_index(0, 0), v1.site_index(1, 0))
    up = np.ones((5, v1.n_sites), dtype=np.int8)
    assert seminorm_distance(up, up, window) == 0
    assert seminorm_distance(up, -up, window) == pytest.approx(2.0)
    uniform = exact_marginal(v1, plus(v1), CouplingParams(0.0), window)
    assert seminorm_distance(uniform, np.full(4, 0.25), window) == pytest.approx(0.0, abs=1e-12)


def test_sampler_deterministic(v1, params):
    a = collect(metropolis_sampler(v1, plus(v1), params, seed=7, sweeps=20, chains=2))
    b = collect(metropolis_sampler(v1, plus(v1), params, seed=7, sweeps=20, chains=2))
    assert a.shape == (40, v1.n_sites)
    assert np.array_equal(a, b)


def test_sampler_matches_exact_marginal(v1):
    params = CouplingParams(beta=0.3)
    origin = (v1.site_index(0, 0),)
    exact = exact_marginal(v1, plus(v1), params, origin)[1]
    samples = collect(metropolis_sampler(v1, plus(v1), params, seed=0, sweeps=2000, burn_in=100, chains=8))
    assert np.mean(samples[:, origin[0]] < 0) == pytest.approx(exact, abs=0.03)


def test_sampler_infinite_temperature(v1):
    samples = collect(metropolis_sampler(v1, plus(v1), CouplingParams(0.0), seed=1, sweeps=500, chains=4))
    m = samples[:, v1.site_index(0, 0)].mean()
    assert abs(m) < 5 / math.sqrt(len(samples))


def test_as_eta_accepts_boundary_condition(v1):
    bc = BoundaryCondition(plus(v1))
    assert as_eta(bc, v1).dtype == np.float64


def test_as_grid(v1):
    grid = as_grid(unpack_spins(np.array([1 | 1 << 5]), v1.n_sites), v1)
    assert grid.shape == (1, 3, 3)
    # rows run bottom to top: site 0 is (-1, -1), site 5 is (1, 0)
    assert grid[0, 0, 0] == -1 and grid[0, 1, 2] == -1
    assert (grid == -1).sum() == 2
