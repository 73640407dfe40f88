""" Contours: boundary-matching groups of pre-contours, their weights, heights and compatibility """
import enum
import functools
from typing import Iterable, List, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from src.models.contour.precontour import (
    PreContour,
    PreContourClass,
    as_bond_mask,
    split_precontours,
)
from src.models.functional.enumerate import broken_mask
from src.models.functional.regions import curve_sides, exterior_sign, realize, trace_open_curves
from src.models.lattice import EAST, NORTH, SOUTH, WEST, BoundarySet, Volume
from src.utils.errors import DomainError, RealizabilityError

# Arm pairs that survive the rounding when another curve passes the same dual vertex
ROUNDED_PAIRS = (frozenset((NORTH, EAST)), frozenset((SOUTH, WEST)))


class ContourClass(str, enum.Enum):
    BULK = "bulk"
    SIMPLE_SMALL = "simple_small"
    CORNER_SMALL = "corner_small"
    LARGE_BOUNDARY = "large_boundary"


class Contour:
    """A connected group (under boundary matching) of compatible pre-contours."""

    def __init__(self, precontours: Iterable[PreContour]):
        precontours = sorted(precontours, key=lambda g: min(g.bonds))
        if not precontours:
            raise DomainError("a contour needs at least one pre-contour")
        self.volume: Volume = precontours[0].volume
        self.precontours = tuple(precontours)

    @classmethod
    def from_mask(cls, mask, volume: Volume) -> "Contour":
        """Rebuild a contour from its bond set (the split of the set is the contour itself)."""
        contours = glue_contours(split_precontours(mask, volume), volume)
        if len(contours) != 1:
            raise RealizabilityError(f"bond set splits into {len(contours)} contours")
        return contours[0]

    @functools.cached_property
    def key(self):
        return frozenset(b for g in self.precontours for b in g.bonds)

    def __eq__(self, other):
        return isinstance(other, Contour) and other.volume.N == self.volume.N and other.key == self.key

    def __hash__(self):
        return hash(self.key)

    def __len__(self):
        return sum(len(g) for g in self.precontours)

    def __repr__(self):
        return f"Contour({self.klass.value}, len={len(self)}, boundary={list(self.boundary.bonds)})"

    @property
    def length(self):
        return len(self)

    @functools.cached_property
    def mask(self):
        m = np.zeros(self.volume.n_bonds, dtype=bool)
        m[list(self.key)] = True
        return m

    @functools.cached_property
    def boundary(self) -> BoundarySet:
        return BoundarySet(self.volume, [k for g in self.precontours for k in g.boundary])

    @functools.cached_property
    def interior(self):
        return np.logical_or.reduce([g.interior for g in self.precontours])

    @property
    def exterior(self):
        return ~self.interior

    @functools.cached_property
    def klass(self) -> ContourClass:
        if len(self.boundary) == 0:
            return ContourClass.BULK
        if any(g.klass == PreContourClass.INTERFACE for g in self.precontours):
            return ContourClass.LARGE_BOUNDARY
        if len(self.boundary.corners()) == 0:
            return ContourClass.SIMPLE_SMALL
        return ContourClass.CORNER_SMALL

    @functools.cached_property
    def realization(self):
        """ The sigma in Omega^+ whose contour set is exactly {self} """
        spins, ok = realize(self.mask[None], self.volume)
        assert ok[0]
        flips = sum(g.site0_inside for g in self.precontours if not g.closed)
        return (spins[0] * (1 - 2 * (flips & 1))).astype(np.int8)

    @functools.cached_property
    def minus(self) -> BoundarySet:
        """ The bonds of the contour boundary whose inner site is -1 in the single-contour realization """
        inner = self.volume.boundary_inner
        return BoundarySet(self.volume, [k for k in self.boundary if self.realization[inner[k]] < 0])

    @functools.cached_property
    def plus(self) -> BoundarySet:
        return BoundarySet(self.volume, [k for k in self.boundary if k not in set(self.minus.bonds)])

    @functools.cached_property
    def arms(self):
        return vertex_arms(self.key, self.volume)

    def height(self):
        return height(self, self.volume)

    def to_json(self):
        return {
            "class": self.klass.value,
            "length": len(self),
            "boundary": list(self.boundary.bonds),
            "boundary_minus": list(self.minus.bonds),
            "precontours": [g.to_json() for g in self.precontours],
        }


def broken_bonds(sigma, volume: Volume):
    """ Delta(sigma) as a bool mask over internal bonds """
    sigma = np.asarray(sigma)
    if sigma.shape != (volume.n_sites,):
        raise DomainError(f"spin configuration has shape {sigma.shape}, expected ({volume.n_sites},)")
    return broken_mask(sigma[None], volume)[0]


def vertex_arms(bonds, volume: Volume):
    """ {dual vertex: frozenset of arm directions used by the bonds} """
    arms = {}
    bv, bd = volume.bond_vertex, volume.bond_direction
    for b in bonds:
        for end in range(2):
            arms.setdefault(int(bv[b, end]), set()).add(int(bd[b, end]))
    return {v: frozenset(d) for v, d in arms.items()}


def _rounding_consistent(a1, a2) -> bool:
    """Curves may only share dual vertices where each keeps to one rounded pair of arms."""
    return all(a1[x] in ROUNDED_PAIRS and a2[x] in ROUNDED_PAIRS for x in a1.keys() & a2.keys())


def _precontours_compatible(g1: PreContour, g2: PreContour) -> bool:
    if g1.key & g2.key:
        return False
    return _rounding_consistent(vertex_arms(g1.bonds, g1.volume), vertex_arms(g2.bonds, g2.volume))


def glue_contours(precontours: Sequence[PreContour], volume: Volume) -> List[Contour]:
    """Connected components of the boundary-matching graph; bulk pre-contours stay alone."""
    precontours = list(precontours)
    n = len(precontours)
    if n == 0:
        return []
    rows, cols = [], []
    for i in range(n):
        for j in range(i + 1, n):
            if not _precontours_compatible(precontours[i], precontours[j]):
                raise RealizabilityError(f"pre-contours {i} and {j} are not compatible")
            if set(precontours[i].boundary.bonds) & set(precontours[j].boundary.bonds):
                rows.append(i)
                cols.append(j)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    groups = {}
    for g, lab in zip(precontours, labels):
        groups.setdefault(lab, []).append(g)
    contours = [Contour(gs) for gs in groups.values()]
    return sorted(contours, key=lambda c: min(c.key))


def extract_contours(sigma, volume: Volume) -> List[Contour]:
    """ D(sigma) """
    return glue_contours(split_precontours(broken_bonds(sigma, volume), volume), volume)


def contour_weight(contour: Contour, eta, params) -> float:
    """ log rho = -2 beta (|Gamma| + lam * sum of eta over the minus boundary component) """
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != (contour.volume.n_boundary,):
        raise DomainError(f"boundary condition has shape {eta.shape}, expected ({contour.volume.n_boundary},)")
    field = eta[list(contour.minus.bonds)].sum() if len(contour.minus) else 0.0
    return -2.0 * params.beta * (len(contour) + params.lam * field)


def vacuum_energy(eta, params) -> float:
    """ E(empty) for the all-plus configuration """
    return -params.lam * params.beta * float(np.sum(eta))


def compatible(c1: Contour, c2: Contour) -> bool:
    """Both contours appear together in D(sigma) for some sigma."""
    if c1.key & c2.key:
        return False
    if set(c1.boundary.bonds) & set(c2.boundary.bonds):
        return False
    return _rounding_consistent(c1.arms, c2.arms)


def is_compatible_family(family: Sequence[Contour]) -> bool:
    family = list(family)
    return all(compatible(family[i], family[j]) for i in range(len(family)) for j in range(i + 1, len(family)))


def config_from_contours(family: Sequence[Contour], sign: int, volume: Volume):
    """The unique sigma in Omega^sign with D(sigma) = family."""
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    family = list(family)
    if not is_compatible_family(family):
        raise RealizabilityError("contour family is not pairwise compatible")
    mask = np.zeros(volume.n_bonds, dtype=bool)
    for c in family:
        mask |= c.mask
    spins, ok = realize(mask[None], volume)
    if not ok[0]:
        raise RealizabilityError("contour family has no realization")
    sigma = (spins[0] * sign * exterior_sign(spins, volume)[0]).astype(np.int8)
    if set(extract_contours(sigma, volume)) != set(family):
        raise RealizabilityError("contour family is not the contour set of any configuration")
    return sigma


def _bond_points(bonds):
    return np.array([p for b in bonds for p in (b.a, b.b)], dtype=np.int64)


def _rectangle_perimeter(p, q, c):
    """ Dual sites (doubled) on the perimeter of the axis-parallel rectangle spanned by p, q and corner c """
    xs = sorted({p[0], q[0], c[0]})
    ys = sorted({p[1], q[1], c[1]})
    x0, x1, y0, y1 = xs[0], xs[-1], ys[0], ys[-1]
    pts = set()
    for x in range(x0, x1 + 1, 2):
        pts.add((x, y0)); pts.add((x, y1))
    for y in range(y0, y1 + 1, 2):
        pts.add((x0, y)); pts.add((x1, y))
    return np.array(sorted(pts), dtype=np.int64)


def height(contour: Contour, volume: Volume = None) -> int:
    """Max distance of a bond of the contour to its boundary (simple) or to the rectangle R (corner)."""
    v = contour.volume
    pts = _bond_points([v.bonds[b] for b in sorted(contour.key)])  # (2k, 2)
    if contour.klass == ContourClass.SIMPLE_SMALL:
        target = _bond_points(contour.boundary.dual_bonds())
    elif contour.klass == ContourClass.CORNER_SMALL:
        corners = contour.boundary.corners()
        if len(corners) != 1:
            raise DomainError(f"corner height needs exactly one corner in the contour boundary, got {corners}")
        hull = contour.boundary.hull
        M, mine = v.n_boundary, set(hull.bonds)
        first = next(k for k in hull.bonds if (k - 1) % M not in mine)
        last = next(k for k in hull.bonds if (k + 1) % M not in mine)
        p, q = v.ring[(first - 1) % M], v.ring[last]
        target = _rectangle_perimeter(p, q, v.corners[corners[0]])
    else:
        raise DomainError(f"height is defined for small boundary contours, got {contour.klass.value}")
    d = cdist(pts, target, metric="cityblock").min(axis=1).reshape(-1, 2).min(axis=1)
    return int(round(d.max())) // 2


def detect_interface(sigma, volume: Volume) -> bool:
    sigma = np.asarray(sigma)
    _, masks, _ = trace_open_curves(broken_bonds(sigma, volume)[None], volume)
    if not len(masks):
        return False
    _, _, corners, _ = curve_sides(masks, volume)
    return bool((corners == 2).any())


def detect_interfaces(spins, volume: Volume):
    """ Batched detect_interface : (B, n) -> (B,) bool """
    spins = np.atleast_2d(spins)
    cfg, masks, _ = trace_open_curves(broken_mask(spins, volume), volume)
    hit = np.zeros(len(spins), dtype=bool)
    if len(cfg):
        _, _, corners, _ = curve_sides(masks, volume)
        hit[cfg[corners == 2]] = True
    return hit
