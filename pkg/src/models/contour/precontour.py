""" Pre-contours: the simple curves obtained from a broken-bond set by the rounding-corner split """
import enum
import functools
from typing import List, Sequence

import numpy as np

from src.models.functional.regions import PARTNER, curve_sides, realize
from src.models.lattice import OPPOSITE, BoundarySet, DualBond, Volume
from src.utils.errors import DomainError, RealizabilityError


class PreContourClass(str, enum.Enum):
    BULK = "bulk"
    SMALL_BOUNDARY = "small_boundary"
    INTERFACE = "interface"


class PreContour:
    """A curve of internal dual bonds, closed or running between two boundary dual sites.

    bonds    : internal bond indices in curve order
    vertices : dual vertex indices visited, len(bonds) + 1 entries
    """

    def __init__(self, volume: Volume, bonds: Sequence[int], vertices: Sequence[int]):
        if len(bonds) == 0 or len(vertices) != len(bonds) + 1:
            raise DomainError("a pre-contour needs at least one bond and one more vertex than bonds")
        self.volume = volume
        self.bonds = tuple(int(b) for b in bonds)
        self.vertices = tuple(int(x) for x in vertices)
        self.closed = self.vertices[0] == self.vertices[-1]
        if self.closed and len(self.bonds) < 4:
            raise DomainError("closed pre-contours have at least 4 bonds")
        if not self.closed and not (volume.is_ring[self.vertices[0]] and volume.is_ring[self.vertices[-1]]):
            raise DomainError("open pre-contours end on the boundary")

    @functools.cached_property
    def key(self):
        return frozenset(self.bonds)

    def __eq__(self, other):
        return isinstance(other, PreContour) and other.volume.N == self.volume.N and other.key == self.key

    def __hash__(self):
        return hash(self.key)

    def __len__(self):
        return len(self.bonds)

    def __repr__(self):
        return f"PreContour({self.klass.value}, len={len(self)}, closed={self.closed})"

    @functools.cached_property
    def mask(self):
        m = np.zeros(self.volume.n_bonds, dtype=bool)
        m[list(self.bonds)] = True
        return m

    @property
    def curve(self) -> List[DualBond]:
        return [self.volume.bonds[b] for b in self.bonds]

    @functools.cached_property
    def _sides(self):
        interior, site0_in, corners, boundary = curve_sides(self.mask[None], self.volume)
        return interior[0], bool(site0_in[0]), int(corners[0]), np.nonzero(boundary[0])[0]

    @property
    def interior(self):
        return self._sides[0]

    @property
    def exterior(self):
        return ~self._sides[0]

    @property
    def site0_inside(self):
        return self._sides[1]

    @property
    def interior_corners(self):
        return self._sides[2]

    @functools.cached_property
    def boundary(self) -> BoundarySet:
        """ The boundary bonds of Int(gamma) """
        return BoundarySet(self.volume, self._sides[3])

    @functools.cached_property
    def klass(self) -> PreContourClass:
        if len(self.boundary) == 0:
            return PreContourClass.BULK
        if self.interior_corners == 2:
            return PreContourClass.INTERFACE
        return PreContourClass.SMALL_BOUNDARY

    def to_json(self):
        return {
            "bonds": [b.to_list() for b in self.curve],
            "closed": self.closed,
            "class": self.klass.value,
        }


def as_bond_mask(delta, volume: Volume):
    """Accepts a bool mask over internal bonds or an iterable of DualBond / bond indices."""
    if isinstance(delta, np.ndarray) and delta.dtype == bool:
        if delta.shape != (volume.n_bonds,):
            raise DomainError(f"bond mask has shape {delta.shape}, expected ({volume.n_bonds},)")
        return delta
    mask = np.zeros(volume.n_bonds, dtype=bool)
    for b in delta:
        mask[volume.bond_id(b) if isinstance(b, DualBond) else int(b)] = True
    return mask


def _next_arm(mask, volume, vertex, came):
    arms = volume.arm_bond[vertex]
    broken = [d for d in range(4) if arms[d] >= 0 and mask[arms[d]] and d != came]
    if len(broken) == 1:
        return broken[0]
    assert len(broken) == 3, "odd dual-vertex degree inside the volume"
    return int(PARTNER[came])


def split_precontours(delta, volume: Volume) -> List[PreContour]:
    """Rounding-corner split of a broken-bond set into pre-contours.

    Open curves come first in counterclockwise order of their first endpoint, then closed
    curves ordered by their smallest bond index.
    """
    mask = as_bond_mask(delta, volume)
    _, ok = realize(mask[None], volume)
    if not ok[0]:
        raise RealizabilityError("bond set has an odd dual-vertex degree inside the volume")

    used = np.zeros(volume.n_bonds, dtype=bool)
    curves = []

    def walk(vertex, direction, first):
        bonds, vertices = [], [vertex]
        while True:
            b = int(volume.arm_bond[vertex, direction])
            bonds.append(b)
            used[b] = True
            vertex = int(volume.arm_vertex[vertex, direction])
            vertices.append(vertex)
            if volume.is_ring[vertex]:
                return bonds, vertices
            direction = _next_arm(mask, volume, vertex, OPPOSITE[direction])
            if volume.arm_bond[vertex, direction] == first:  # closed curve is back at its first bond
                return bonds, vertices

    for r in volume.ring_vertices:
        if volume.is_corner[r]:
            continue
        d = int(np.argmax(volume.arm_bond[r] >= 0))
        b = volume.arm_bond[r, d]
        if mask[b] and not used[b]:
            curves.append(PreContour(volume, *walk(int(r), d, int(b))))

    for b in np.nonzero(mask & ~used)[0]:
        if used[b]:
            continue
        start, d = int(volume.bond_vertex[b, 0]), int(volume.bond_direction[b, 0])
        curves.append(PreContour(volume, *walk(start, d, int(b))))
    return curves


def classify_precontour(gamma: PreContour, volume: Volume = None):
    """ Returns (class, Ext mask, Int mask) """
    if volume is not None and volume.N != gamma.volume.N:
        raise DomainError("pre-contour lives on a different volume")
    return gamma.klass, gamma.exterior, gamma.interior
