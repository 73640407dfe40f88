import math

import numpy as np
import pytest

from src.dataloaders.boundary import StripBC
from src.models.contour.contour import contour_weight, extract_contours, vacuum_energy
from src.models.clusterexp import partition_function
from src.models.ising import CouplingParams, constrained_logZ
from src.models.multiscale.aggregates import Aggregate
from src.models.multiscale.expansion import (
    aggregate_logZ,
    aggregate_measure,
    compatible_families,
    phi0_table,
    sequential_expansion,
    step_zero_expansion,
)
from src.models.multiscale.mayer import (
    Interaction,
    MayerCluster,
    interaction_weight,
    interactions,
    mayer_bound,
    mayer_weight,
    stage_clusters,
)
from src.models.multiscale.schedule import build_schedule
from src.models.multiscale.validators import check_mayer_weights
from tests.conftest import spins_with


@pytest.fixture
def corner_pair(v2):
    """ Two incompatible corner contours of Lambda(2) sharing a bond """
    (a,) = extract_contours(spins_with(v2, [(2, 2)]), v2)
    (b,) = extract_contours(spins_with(v2, [(2, 2), (2, 1)]), v2)
    return a, b


def test_phi0_single_polymer(v2, corner_pair):
    a, _ = corner_pair
    eta = np.ones(v2.n_boundary)
    params = CouplingParams(1.0)
    _, table = phi0_table([a], eta, params)
    assert table[1] == pytest.approx(math.log1p(math.exp(contour_weight(a, eta, params))))


def test_phi0_locality(v2, corner_pair):
    # weights that agree on the cluster give the same phi_0
    a, b = corner_pair
    params = CouplingParams(1.0)
    eta = np.ones(v2.n_boundary)
    other = eta.copy()
    other[12] = -1
    assert 12 not in set(a.boundary.bonds) | set(b.boundary.bonds)
    _, t1 = phi0_table([a, b], eta, params)
    _, t2 = phi0_table([a, b], other, params)
    assert t1[0b11] == pytest.approx(t2[0b11])


def test_aggregate_logZ(v2, corner_pair):
    a, b = corner_pair
    eta = np.ones(v2.n_boundary)
    params = CouplingParams(1.0)
    ra, rb = (math.exp(contour_weight(c, eta, params)) for c in (a, b))
    assert aggregate_logZ(Aggregate(order=1, contours=[], scale=1.0), eta, params) == 0.0
    assert aggregate_logZ(Aggregate(order=1, contours=[a], scale=1.0), eta, params) == pytest.approx(math.log1p(ra))
    assert compatible_families([a, b]) == [0, 0b10, 0b01]
    assert aggregate_logZ(Aggregate(order=1, contours=[a, b], scale=1.0), eta, params) == pytest.approx(math.log(1 + ra + rb))


def test_mayer_weights(v2, corner_pair):
    a, b = corner_pair
    eta = np.ones(v2.n_boundary)
    params = CouplingParams(0.5)
    measures = [aggregate_measure(Aggregate(order=1, contours=[c], scale=1.0), eta, params) for c in (a, b)]
    p = measures[0].probabilities[1]
    one = MayerCluster(phi=0.3, touches={0: 1})
    assert mayer_weight(measures, [one]) == pytest.approx(p * math.expm1(-0.3))
    assert mayer_weight(measures, []) == 1.0
    assert mayer_weight(measures, [MayerCluster(phi=0.3)]) == 0.0
    two = [one, MayerCluster(phi=-0.2, touches={1: 1})]
    assert all(m.holds for m in check_mayer_weights(measures, two))
    assert abs(mayer_weight(measures, two)) <= mayer_bound(two)


def test_step_zero_polymer_system(v1, census1, schedule1, random_eta):
    eta = random_eta(v1, 2)
    params = CouplingParams(1.0)
    zero = step_zero_expansion(v1, eta, params, schedule1, census=census1, max_polymers=1000)
    assert zero.complete and zero.residual == 0.0
    assert zero.census_discrepancy < 1e-8
    assert zero.phi0_total == pytest.approx(zero.census_total, abs=1e-9)
    assert zero.phi0_total == pytest.approx(math.log(partition_function(zero.system)))
    assert zero.system.n == len(zero.polymers)
    for i, c in enumerate(zero.polymers[:5]):
        assert zero.phi0[1 << i] == pytest.approx(math.log1p(math.exp(contour_weight(c, eta, params))))


def test_step_zero_truncated_pool(v1, census1, schedule1, random_eta):
    eta = random_eta(v1, 2)
    params = CouplingParams(1.0)
    zero = step_zero_expansion(v1, eta, params, schedule1, census=census1, max_polymers=3)
    assert not zero.complete and len(zero.polymers) == 3
    assert zero.phi0_total == zero.census_total
    listed = sum(float(np.real(v)) for _, v in zero.phi0.items())
    assert zero.residual == pytest.approx(zero.phi0_total - listed)
    assert zero.to_json()["polymers"] == 3


def test_stage_clusters(v2, corner_pair):
    a, b = corner_pair
    (c,) = extract_contours(spins_with(v2, [(-2, -2)]), v2)
    eta = np.ones(v2.n_boundary)
    measures = [aggregate_measure(Aggregate(order=1, contours=[x], scale=1.0), eta, CouplingParams(0.5)) for x in (a, b, c)]
    rng = np.random.default_rng(0)
    log_G = 0.5 * rng.normal(size=(2, 2, 2))
    log_G -= log_G[0, 0, 0]
    p = [m.probabilities for m in measures]
    direct = math.log(np.einsum("ijk,i,j,k->", np.exp(log_G), *p))

    found = interactions(log_G)
    assert len(found) == 7
    rebuilt = np.zeros_like(log_G)
    for s in found:
        shape = [2 if ax in s.aggregates else 1 for ax in range(3)]
        rebuilt = rebuilt + s.u.reshape(shape)
    assert np.allclose(rebuilt, log_G)

    clusters = stage_clusters(measures, log_G)
    assert clusters.psi == pytest.approx(direct, abs=1e-12)
    assert clusters.system.n == 7 and not clusters.system.is_polymer_model
    assert math.log(partition_function(clusters.level)) == pytest.approx(direct, abs=1e-12)
    # the same expectation expanded around another joint family
    ref = (1, 0, 1)
    moved = stage_clusters(measures, log_G - log_G[ref], ref)
    assert moved.psi + log_G[ref] == pytest.approx(direct, abs=1e-12)
    # interactions vanish whenever one of their aggregates sits at the reference
    for s in interactions(log_G - log_G[ref], ref):
        for k, ax in enumerate(s.aggregates):
            assert np.allclose(np.take(s.u, ref[ax], axis=k), 0.0)


def test_interaction_weight_factorizes(v2, corner_pair):
    a, b = corner_pair
    eta = np.ones(v2.n_boundary)
    measures = [aggregate_measure(Aggregate(order=1, contours=[x], scale=1.0), eta, CouplingParams(0.5)) for x in (a, b)]
    s0 = Interaction((0,), np.array([0.0, 0.4]))
    s1 = Interaction((1,), np.array([0.0, -0.7]))
    w0, w1 = interaction_weight(measures, [s0]), interaction_weight(measures, [s1])
    assert w0 == pytest.approx(measures[0].probabilities[1] * math.expm1(0.4))
    assert interaction_weight(measures, [s0, s1]) == pytest.approx(w0 * w1)
    assert interaction_weight(measures, []) == 1.0


def test_stage_psi_matches_direct_sum(v1, census1, schedule1, random_eta):
    params = CouplingParams(2.0)
    for seed in range(10):
        report = sequential_expansion(v1, random_eta(v1, seed), params, schedule1, census=census1)
        for stage in report.stages:
            assert stage.psi == pytest.approx(stage.psi_direct, abs=1e-9)
            if stage.clusters is not None:
                assert math.log(partition_function(stage.clusters.level)) == pytest.approx(stage.clusters.psi, abs=1e-9)
        assert report.to_json()["step_zero"]["complete"] == report.step_zero.complete


def test_plus_boundary_has_no_aggregates(v1, census1, schedule1):
    eta = np.ones(v1.n_boundary)
    params = CouplingParams(1.0)
    report = sequential_expansion(v1, eta, params, schedule1, census=census1)
    assert report.stages == []
    assert report.log_Z == pytest.approx(report.vacuum + report.phi0_total)
    assert report.log_Z == pytest.approx(constrained_logZ(v1, eta, params)[0], abs=1e-9)


def test_step_zero_vacuum(v1, census1, schedule1, random_eta):
    eta = random_eta(v1, 4)
    params = CouplingParams(0.7, 0.5)
    zero = step_zero_expansion(v1, eta, params, schedule1, census=census1)
    assert zero.vacuum == pytest.approx(-vacuum_energy(eta, params))
    assert zero.vacuum == pytest.approx(0.35 * eta.sum())


@pytest.mark.parametrize("seed", range(20))
def test_expansion_is_exact(v1, census1, schedule1, random_eta, seed):
    eta = random_eta(v1, seed)
    params = CouplingParams(2.0)
    lzp, lzm = constrained_logZ(v1, eta, params)
    plus = sequential_expansion(v1, eta, params, schedule1, census=census1)
    minus = sequential_expansion(v1, eta, params, schedule1, census=census1, sign=-1)
    assert plus.log_Z == pytest.approx(lzp, abs=1e-9)
    # Z^{-, eta} = Z^{+, -eta}
    assert minus.log_Z == pytest.approx(lzm, abs=1e-9)
    assert np.array_equal(minus.eta, -plus.eta)


def test_report_json(v1, census1, schedule1, random_eta):
    report = sequential_expansion(v1, random_eta(v1, 1), CouplingParams(2.0), schedule1, census=census1)
    payload = report.to_json()
    assert payload["log_Z"] == pytest.approx(report.log_Z)
    assert set(payload["terms"]) == {"vacuum", "clusters_step_zero", "psi_levels", "psi_corner", "log_Zhat_levels", "log_Zhat_corner"}


@pytest.mark.slow
def test_expansion_n2_plus(v2, census2):
    eta = np.ones(v2.n_boundary)
    params = CouplingParams(2.0)
    report = sequential_expansion(v2, eta, params, build_schedule(5.0, 0.1, 2), census=census2)
    assert report.log_Z == pytest.approx(census2.constrained_log_partition(eta, 2.0)[0], abs=1e-8)


@pytest.mark.slow
def test_expansion_n2_strip(v2, census2):
    eta = StripBC(start=-1, length=7, side=3).sample(2).values
    params = CouplingParams(2.0)
    schedule = build_schedule(5.0, 0.1, 2, L_overrides=[2.0], l_overrides=[12.0])
    report = sequential_expansion(v2, eta, params, schedule, census=census2)
    assert report.stages
    lzp, lzm = census2.constrained_log_partition(eta, 2.0)
    assert report.log_Z == pytest.approx(lzp, abs=1e-8)
    minus = sequential_expansion(v2, eta, params, schedule, census=census2, sign=-1)
    assert minus.log_Z == pytest.approx(lzm, abs=1e-8)


N2_STRIPS = [(0, 4, 0), (2, 6, 1), (4, 6, 3), (3, 5, 2), (1, 7, 0), (0, 3, 2)]


@pytest.mark.slow
@pytest.mark.parametrize("case", [("random", seed) for seed in range(14)] + [("strip", s) for s in N2_STRIPS])
def test_expansion_n2_is_exact(v2, census2, random_eta, case):
    kind, arg = case
    params = CouplingParams(2.0)
    if kind == "random":
        eta = random_eta(v2, arg)
        schedule = build_schedule(5.0, 0.1, 2)
    else:
        start, length, side = arg
        eta = StripBC(start=start, length=length, side=side).sample(2).values
        schedule = build_schedule(5.0, 0.1, 2, L_overrides=[2.0], l_overrides=[12.0])
    lzp, lzm = census2.constrained_log_partition(eta, 2.0)
    plus = sequential_expansion(v2, eta, params, schedule, census=census2)
    assert plus.log_Z == pytest.approx(lzp, abs=1e-8)
    minus = sequential_expansion(v2, eta, params, schedule, census=census2, sign=-1)
    assert minus.log_Z == pytest.approx(lzm, abs=1e-8)
