import numpy as np
import pytest

from src.models.contour.contour import extract_contours
from src.models.lattice import build_volume
from src.models.multiscale.aggregates import (
    decompose_aggregates,
    domain_of,
    is_balanced,
    minus_sum,
    unbalanced_contours,
)
from src.models.multiscale.schedule import build_schedule
from tests.conftest import spins_with


@pytest.fixture(scope="module")
def strip():
    """ A 1x9 strip on the right wall of Lambda(5): |Gamma| = 11, boundary bonds 1..9 """
    v = build_volume(5)
    (c,) = extract_contours(spins_with(v, [(5, y) for y in range(-4, 5)]), v)
    eta = np.ones(v.n_boundary)
    eta[1:10] = -1
    return v, c, eta


def test_bulk_is_balanced(v2):
    (c,) = extract_contours(spins_with(v2, [(0, 0)]), v2)
    assert is_balanced(c, -np.ones(v2.n_boundary), 5.0)


def test_strip_balance(strip):
    v, c, eta = strip
    assert len(c) == 11
    assert minus_sum(c, eta) == -9
    assert not is_balanced(c, eta, 5.0)
    eta = eta.copy()
    eta[5] = 1
    assert minus_sum(c, eta) == -7
    assert is_balanced(c, eta, 5.0)


def test_no_unbalanced(strip):
    v, _, _ = strip
    schedule = build_schedule(5.0, 0.1, v.N)
    assert unbalanced_contours(v, np.ones(v.n_boundary), schedule) == []
    d = decompose_aggregates([], schedule, v)
    assert d.aggregates == [] and d.max_level == 0


def test_strip_level_one(strip):
    v, c, eta = strip
    schedule = build_schedule(5.0, 0.1, v.N, L_overrides=[2.0], l_overrides=[12.0])
    d = decompose_aggregates([c], schedule, v)
    (agg,) = d.aggregates
    assert agg.order == 1
    assert agg.boundary_con == 9
    assert not agg.flagged
    assert set(c.boundary.bonds) <= set(agg.domain.bonds)


def test_strip_too_long_for_level_one(strip):
    v, c, eta = strip
    d = decompose_aggregates([c], build_schedule(5.0, 0.1, v.N), v)
    (agg,) = d.aggregates
    assert agg.is_corner
    assert agg.flagged


def test_corner_aggregate():
    v = build_volume(20)
    (c,) = extract_contours(spins_with(v, [(20, 20)]), v)
    eta = np.ones(v.n_boundary)
    eta[list(c.boundary.bonds)] = -1
    schedule = build_schedule(5.0, 0.1, v.N)
    assert not is_balanced(c, eta, schedule)
    d = decompose_aggregates([c], schedule, v)
    (agg,) = d.corners
    assert agg.corner == 2
    assert not agg.flagged
    assert agg.label == "corner2"


def test_domain_of(strip):
    v, c, _ = strip
    # radius 0 adds the two wall bonds sharing an endpoint with the strip
    assert domain_of([c], 0, v).bonds == tuple(range(11))
    assert domain_of([c], 1, v).bonds == tuple(range(12)) + (43,)
