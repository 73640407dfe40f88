import numpy as np
import pytest

from src.models.contour.contour import (
    Contour,
    ContourClass,
    broken_bonds,
    compatible,
    config_from_contours,
    contour_weight,
    detect_interface,
    detect_interfaces,
    extract_contours,
    is_compatible_family,
    vacuum_energy,
)
from src.models.contour.enumeration import enumerate_closed_curves, enumerate_open_curves, enumerate_unbalanced_curves
from src.models.contour.precontour import PreContourClass, classify_precontour, split_precontours
from src.models.functional.enumerate import unpack_spins
from src.models.ising import CouplingParams, constrained_split
from src.models.lattice import DualBond, build_volume
from src.utils.errors import DomainError, RealizabilityError
from tests.conftest import spins_with


def wall_strip(N, ys):
    """ Minus spins on the right wall at heights ys, with the contour they produce """
    v = build_volume(N)
    sigma = spins_with(v, [(N, y) for y in ys])
    (c,) = extract_contours(sigma, v)
    return v, sigma, c


def test_broken_bonds(v1):
    assert not broken_bonds(np.ones(9), v1).any()
    assert broken_bonds(spins_with(v1, [(0, 0)]), v1).sum() == 4
    checkerboard = np.where(v1.sites.sum(axis=1) % 2 == 0, 1, -1)
    assert broken_bonds(checkerboard, v1).sum() == 12


def test_split_closed(v2):
    (g,) = split_precontours(broken_bonds(spins_with(v2, [(0, 0)]), v2), v2)
    assert g.closed and len(g) == 4
    assert g.klass == PreContourClass.BULK
    assert len(split_precontours(broken_bonds(spins_with(v2, [(-1, 0), (1, 0)]), v2), v2)) == 2


def test_rounding_corner(v2):
    sigma = spins_with(v2, [(0, 0), (1, 1)])
    curves = split_precontours(broken_bonds(sigma, v2), v2)
    assert [len(g) for g in curves] == [4, 4]
    assert all(g.closed for g in curves)
    family = extract_contours(sigma, v2)
    assert len(family) == 2
    assert np.array_equal(config_from_contours(family, 1, v2), sigma)


def test_odd_degree_rejected(v2):
    mask = np.zeros(v2.n_bonds, dtype=bool)
    mask[v2.bond_id(DualBond.of((1, -1), (1, 1)))] = True
    with pytest.raises(RealizabilityError):
        split_precontours(mask, v2)


def test_bulk_interior():
    v = build_volume(3)
    sigma = spins_with(v, [(0, 0), (1, 0)])
    (c,) = extract_contours(sigma, v)
    assert c.klass == ContourClass.BULK
    assert set(np.nonzero(c.interior)[0]) == {v.site_index(0, 0), v.site_index(1, 0)}


def test_corner_cut(v2):
    (c,) = extract_contours(spins_with(v2, [(2, 2)]), v2)
    (g,) = c.precontours
    assert g.klass == PreContourClass.SMALL_BOUNDARY
    assert c.klass == ContourClass.CORNER_SMALL
    assert c.boundary.corners() == [2]
    assert c.height() == 0


def test_horizontal_cut(v2):
    sigma = np.where(v2.sites[:, 1] >= 1, -1, 1).astype(np.int8)
    (c,) = extract_contours(sigma, v2)
    (g,) = c.precontours
    klass, ext, interior = classify_precontour(g)
    assert klass == PreContourClass.INTERFACE
    assert ext.sum() == 15 and interior.sum() == 10
    assert c.klass == ContourClass.LARGE_BOUNDARY
    assert len(c) == 5


def test_disjoint_open_curves(v2):
    family = extract_contours(spins_with(v2, [(2, -1), (2, 1)]), v2)
    assert len(family) == 2
    assert all(c.klass == ContourClass.SIMPLE_SMALL for c in family)
    assert is_compatible_family(family)


def test_weights(v2):
    params = CouplingParams(1.0)
    (bulk,) = extract_contours(spins_with(v2, [(0, 0)]), v2)
    eta = np.ones(v2.n_boundary)
    assert contour_weight(bulk, eta, params) == pytest.approx(-8)

    _, _, strip = wall_strip(2, [-1, 0, 1])
    assert len(strip) == 5
    assert strip.minus.bonds == (1, 2, 3)
    eta_minus = eta.copy()
    eta_minus[[1, 2, 3]] = -1
    assert contour_weight(strip, eta_minus, params) == pytest.approx(-4)
    assert contour_weight(strip, eta, params) == pytest.approx(-16)
    assert vacuum_energy(eta, params) == pytest.approx(-20)


def test_strip_height():
    _, _, c = wall_strip(5, range(-4, 5))
    assert c.klass == ContourClass.SIMPLE_SMALL
    assert c.height() == 1


def test_height_rejects_bulk(v2):
    (c,) = extract_contours(spins_with(v2, [(0, 0)]), v2)
    with pytest.raises(DomainError):
        c.height()


def test_corner_height_needs_one_corner(v2):
    a, b = extract_contours(spins_with(v2, [(2, 2), (2, -2)]), v2)
    joined = Contour(a.precontours + b.precontours)
    assert joined.klass == ContourClass.CORNER_SMALL
    assert sorted(joined.boundary.corners()) == [1, 2]
    with pytest.raises(DomainError, match="exactly one corner"):
        joined.height()


def test_empty_family(v1):
    assert np.array_equal(config_from_contours([], 1, v1), np.ones(9))
    assert np.array_equal(config_from_contours([], -1, v1), -np.ones(9))
    with pytest.raises(DomainError):
        config_from_contours([], 0, v1)


def test_bulk_square_realization(v2):
    (c,) = extract_contours(spins_with(v2, [(0, 0)]), v2)
    assert np.array_equal(config_from_contours([c], 1, v2), spins_with(v2, [(0, 0)]))


def test_exhaustive_round_trip(v1):
    spins = unpack_spins(np.arange(1 << v1.n_sites), v1.n_sites)
    for sigma in spins:
        family = extract_contours(sigma, v1)
        sign = constrained_split(sigma, v1)
        assert np.array_equal(config_from_contours(family, sign, v1), sigma)


def test_compatibility(v2):
    (a,) = extract_contours(spins_with(v2, [(-1, 0)]), v2)
    (b,) = extract_contours(spins_with(v2, [(1, 0)]), v2)
    assert compatible(a, b)
    assert not compatible(a, a)


def test_from_mask(v2):
    (c,) = extract_contours(spins_with(v2, [(2, 2)]), v2)
    assert Contour.from_mask(c.mask, v2) == c


def test_detect_interface(v2):
    assert not detect_interface(np.ones(v2.n_sites), v2)
    halves = np.where(v2.sites[:, 1] >= 1, -1, 1)
    assert detect_interface(halves, v2)
    assert not detect_interface(spins_with(v2, [(0, 0)]), v2)
    batch = np.stack([np.ones(v2.n_sites), halves, spins_with(v2, [(0, 0)])]).astype(np.int8)
    assert detect_interfaces(batch, v2).tolist() == [False, True, False]


def test_closed_curve_enumeration(v2):
    curves = enumerate_closed_curves(v2, 4)
    # unit squares around the sites off the wall
    assert len(curves) == 9
    assert all(len(g) == 4 and g.closed for g in curves)


def test_open_curve_enumeration(v1):
    # one corner site cut off per inner dual vertex
    short = enumerate_open_curves(v1, 2)
    assert len(short) == 4
    assert all(len(g) == 2 and not g.closed for g in short)
    longer = enumerate_open_curves(v1, 3)
    assert set(short) < set(longer)
    assert all(len(g) <= 3 for g in longer)
    # curves of exactly the cap are kept
    assert any(len(g) == 3 for g in longer)
    assert enumerate_open_curves(v1, 3, allowance=lambda r: None) == []


def test_unbalanced_curves():
    v = build_volume(5)
    eta = np.ones(v.n_boundary)
    eta[1:10] = -1
    found = enumerate_unbalanced_curves(v, eta, 5.0)
    _, _, strip = wall_strip(5, range(-4, 5))
    assert strip in found
    assert enumerate_unbalanced_curves(v, np.ones(v.n_boundary), 5.0) == []
