import pytest

from src.models.lattice import (
    BoundarySet,
    DualBond,
    Volume,
    boundary_underline,
    build_volume,
    connected_hull,
    corner_region,
    dual_distance,
    site_distance,
)
from src.utils.errors import DomainError


def unit_square(x, y):
    """ The four dual bonds around site (x, y) """
    X, Y = 2 * x, 2 * y
    return [
        DualBond.of((X - 1, Y - 1), (X + 1, Y - 1)),
        DualBond.of((X + 1, Y - 1), (X + 1, Y + 1)),
        DualBond.of((X - 1, Y + 1), (X + 1, Y + 1)),
        DualBond.of((X - 1, Y - 1), (X - 1, Y + 1)),
    ]


@pytest.mark.parametrize("N, sites, boundary", [(1, 9, 12), (2, 25, 20), (5, 121, 44)])
def test_counts(N, sites, boundary):
    v = build_volume(N)
    assert v.n_sites == sites
    assert v.n_boundary == boundary
    assert v.n_bonds == 2 * v.L * (v.L - 1)


def test_corners(v1):
    assert v1.corner_points() == [(-1.5, -1.5), (1.5, -1.5), (1.5, 1.5), (-1.5, 1.5)]


def test_boundary_order(v1):
    # counterclockwise from the exterior site (N+1, -N)
    assert tuple(v1.boundary_outer[0]) == (2, -1)
    assert tuple(v1.boundary_outer[3]) == (1, 2)
    assert tuple(v1.boundary_outer[-1]) == (1, -2)


def test_invalid_volume():
    with pytest.raises(DomainError):
        Volume(0)


def test_invalid_dual_bond():
    with pytest.raises(DomainError):
        DualBond((0, 1), (2, 1))
    with pytest.raises(DomainError):
        DualBond((1, 1), (1, 5))


def test_underline(v1):
    assert len(boundary_underline(range(12), v1)) == 12
    assert boundary_underline([], v1) == set()
    assert boundary_underline([1], v1) == {(2, 0)}


def test_intervals_break_at_corners(v1):
    P = BoundarySet(v1, range(12))
    assert len(P.intervals) == 4
    assert BoundarySet(v1, [0, 1, 2]).is_interval()


def test_hull_connected(v1):
    P = BoundarySet(v1, [1, 2, 3])
    assert connected_hull(P, v1) == P


def test_hull_shorter_arc(v1):
    hull = connected_hull([0, 3], v1)
    assert hull.bonds == (0, 1, 2, 3)
    assert BoundarySet(v1, [0, 3]).hull_len == 4


def test_hull_tie(v2):
    hull = connected_hull([0, 10], v2)
    assert len(hull) == 11
    assert {0, 10} <= set(hull.bonds)
    assert hull.is_connected()
    assert connected_hull([10, 0], v2) == hull


def test_hull_empty(v1):
    with pytest.raises(DomainError):
        connected_hull([], v1)


def test_dual_distance():
    A = unit_square(0, 0)
    assert dual_distance(A, A) == 0
    assert dual_distance(A, unit_square(3, 0)) == 2
    assert dual_distance(A, unit_square(1, 0)) == 0


def test_site_distance():
    assert site_distance([(0, 0)], [(2, 3)]) == 5
    with pytest.raises(DomainError):
        site_distance([], [(0, 0)])


def test_corner_region(v1, v2):
    R = corner_region(v1, 0)
    assert len(R) == 8
    assert R.corners() == [0, 1, 2, 3]
    assert len(corner_region(v2, 1)) == 16
    assert len(corner_region(v2, 100)) == v2.n_boundary
