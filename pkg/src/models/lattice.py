""" Geometry of the square volume Lambda(N): sites, dual bonds, the boundary cycle, corners and distances.

Coordinates are doubled so that everything is an integer:
    site (x, y)            -> (2x, 2y)      (only used for midpoints)
    dual site (x+1/2, y+1/2) -> (2x+1, 2y+1)
A dual bond is stored by its two (odd, odd) endpoints in lexicographic order.

Index conventions used throughout the package
    site i        = (y+N) * L + (x+N),  L = 2N+1   (row-major, rows bottom to top)
    internal bond : primal horizontal bonds first (rows bottom to top, left to right),
                    then primal vertical bonds
    boundary bond k = 0..4L-1 counterclockwise, starting with the exterior site (N+1, -N)
    dual vertex   = ((Y+L)//2) * (L+1) + (X+L)//2 for doubled (X, Y)
"""
import functools
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from src.utils.errors import DomainError

# Arm directions at a dual vertex
NORTH, EAST, SOUTH, WEST = 0, 1, 2, 3
STEP = ((0, 2), (2, 0), (0, -2), (-2, 0))
OPPOSITE = (SOUTH, WEST, NORTH, EAST)

MAX_N = 1 << 12


@dataclass(frozen=True, order=True)
class DualBond:
    a: Tuple[int, int]
    b: Tuple[int, int]

    def __post_init__(self):
        a, b = self.a, self.b
        if not all(c % 2 for c in (*a, *b)):
            raise DomainError(f"dual bond endpoints must be dual sites (odd doubled coordinates): {a}, {b}")
        if sorted((abs(a[0] - b[0]), abs(a[1] - b[1]))) != [0, 2]:
            raise DomainError(f"dual bond endpoints must be unit distance apart: {a}, {b}")
        if not a < b:
            raise DomainError(f"dual bond endpoints must be in lexicographic order: {a}, {b}")

    @classmethod
    def of(cls, p, q):
        p, q = tuple(int(c) for c in p), tuple(int(c) for c in q)
        return cls(*sorted((p, q)))

    @property
    def midpoint(self):
        return ((self.a[0] + self.b[0]) // 2, (self.a[1] + self.b[1]) // 2)

    @property
    def vertical(self):
        """A vertical dual bond crosses a horizontal primal bond."""
        return self.a[0] == self.b[0]

    def to_list(self):
        return [list(self.a), list(self.b)]


class Volume:
    """The square Lambda(N) = {x : |x|_inf <= N} with all derived index tables materialized eagerly."""

    def __init__(self, N: int):
        if not isinstance(N, (int, np.integer)) or N < 1:
            raise DomainError(f"volume half-side must be a positive integer, got {N!r}")
        if N > MAX_N:
            raise DomainError(f"volume half-side {N} exceeds the supported scale {MAX_N}")
        self.N = N = int(N)
        self.L = L = 2 * N + 1
        self.n_sites = L * L

        ys, xs = np.divmod(np.arange(self.n_sites), L)
        self.sites = np.stack([xs - N, ys - N], axis=-1)  # (n_sites, 2)

        self._build_bonds()
        self._build_boundary()
        self._build_dual_vertices()
        self._build_weights()

    # -- construction ---------------------------------------------------------

    def site_index(self, x, y):
        N, L = self.N, self.L
        if max(abs(x), abs(y)) > N:
            raise DomainError(f"site {(x, y)} is not in Lambda({N})")
        return (y + N) * L + (x + N)

    def _build_bonds(self):
        N, L = self.N, self.L
        pairs, bonds = [], []
        for y in range(-N, N + 1):
            for x in range(-N, N):
                pairs.append((self.site_index(x, y), self.site_index(x + 1, y)))
                bonds.append(DualBond.of((2 * x + 1, 2 * y - 1), (2 * x + 1, 2 * y + 1)))
        self.n_horizontal = len(pairs)
        for y in range(-N, N):
            for x in range(-N, N + 1):
                pairs.append((self.site_index(x, y), self.site_index(x, y + 1)))
                bonds.append(DualBond.of((2 * x - 1, 2 * y + 1), (2 * x + 1, 2 * y + 1)))
        self.bond_sites = np.array(pairs, dtype=np.int64)  # (n_bonds, 2)
        self.bonds: List[DualBond] = bonds
        self.n_bonds = len(bonds)
        self.bond_index = {b: i for i, b in enumerate(bonds)}
        self.bond_endpoints = np.array([[b.a, b.b] for b in bonds], dtype=np.int64)  # (n_bonds, 2, 2)

    def _build_boundary(self):
        N, L = self.N, self.L
        outer, inner = [], []
        for y in range(-N, N + 1):  # right side, upwards
            outer.append((N + 1, y)); inner.append((N, y))
        for x in range(N, -N - 1, -1):  # top side, leftwards
            outer.append((x, N + 1)); inner.append((x, N))
        for y in range(N, -N - 1, -1):  # left side, downwards
            outer.append((-N - 1, y)); inner.append((-N, y))
        for x in range(-N, N + 1):  # bottom side, rightwards
            outer.append((x, -N - 1)); inner.append((x, -N))
        self.n_boundary = len(outer)
        self.boundary_outer = np.array(outer, dtype=np.int64)  # (M, 2)
        self.boundary_inner = np.array([self.site_index(*s) for s in inner], dtype=np.int64)  # (M,)
        bbonds = []
        for (ox, oy), (ix, iy) in zip(outer, inner):
            mx, my = ox + ix, oy + iy  # doubled midpoint
            if ox != ix:
                bbonds.append(DualBond.of((mx, my - 1), (mx, my + 1)))
            else:
                bbonds.append(DualBond.of((mx - 1, my), (mx + 1, my)))
        self.boundary_bonds: List[DualBond] = bbonds
        self.boundary_index = {b: k for k, b in enumerate(bbonds)}
        self.boundary_endpoints = np.array([[b.a, b.b] for b in bbonds], dtype=np.int64)
        # ring vertex k is shared by boundary bonds k and k+1
        ring = []
        M = self.n_boundary
        for k in range(M):
            nxt = bbonds[(k + 1) % M]
            shared = {bbonds[k].a, bbonds[k].b} & {nxt.a, nxt.b}
            assert len(shared) == 1
            ring.append(shared.pop())
        self.ring = ring
        # corners in the order (-,-), (+,-), (+,+), (-,+)
        c = 2 * N + 1
        self.corners = [(-c, -c), (c, -c), (c, c), (-c, c)]
        self.corner_sites = np.array(
            [self.site_index(-N, -N), self.site_index(N, -N), self.site_index(N, N), self.site_index(-N, N)]
        )
        self.corner_ring_position = [ring.index(p) for p in self.corners]

    def _build_dual_vertices(self):
        N, L = self.N, self.L
        side = L + 1
        self.n_vertices = side * side
        coords = []
        for j in range(side):
            for i in range(side):
                coords.append((2 * i - L, 2 * j - L))
        self.vertex_coords = np.array(coords, dtype=np.int64)
        arm_bond = -np.ones((self.n_vertices, 4), dtype=np.int64)
        arm_vertex = -np.ones((self.n_vertices, 4), dtype=np.int64)
        for v, (X, Y) in enumerate(coords):
            for d, (dx, dy) in enumerate(STEP):
                q = (X + dx, Y + dy)
                if max(abs(q[0]), abs(q[1])) > L:
                    continue
                bond = DualBond.of((X, Y), q)
                if bond in self.bond_index:
                    arm_bond[v, d] = self.bond_index[bond]
                    arm_vertex[v, d] = self.vertex_index(*q)
        self.arm_bond = arm_bond  # (n_vertices, 4), -1 where the arm is not an internal bond
        self.arm_vertex = arm_vertex
        # endpoints of every internal bond and the arm leading from the first to the second
        self.bond_vertex = np.array(
            [[self.vertex_index(*b.a), self.vertex_index(*b.b)] for b in self.bonds], dtype=np.int64
        )
        self.bond_direction = np.array(
            [[NORTH, SOUTH] if b.vertical else [EAST, WEST] for b in self.bonds], dtype=np.int64
        )
        vc = self.vertex_coords
        self.is_ring = (np.abs(vc[:, 0]) == L) | (np.abs(vc[:, 1]) == L)
        self.is_corner = (np.abs(vc[:, 0]) == L) & (np.abs(vc[:, 1]) == L)
        self.ring_vertices = np.array([self.vertex_index(*p) for p in self.ring], dtype=np.int64)
        self.ring_position = {int(v): k for k, v in enumerate(self.ring_vertices)}
        # checkerboard plaquettes around interior dual vertices: sites (NE, NW, SW, SE)
        plaq, plaq_arms = [], []
        for v, (X, Y) in enumerate(coords):
            if max(abs(X), abs(Y)) >= L:
                continue
            ne = self.site_index((X + 1) // 2, (Y + 1) // 2)
            nw = self.site_index((X - 1) // 2, (Y + 1) // 2)
            sw = self.site_index((X - 1) // 2, (Y - 1) // 2)
            se = self.site_index((X + 1) // 2, (Y - 1) // 2)
            plaq.append((ne, nw, sw, se))
            plaq_arms.append(arm_bond[v])
        self.plaquette_sites = np.array(plaq, dtype=np.int64).reshape(-1, 4)
        self.plaquette_arms = np.array(plaq_arms, dtype=np.int64).reshape(-1, 4)

    def _build_weights(self):
        # Additive site weight deciding Ext/Int: corners dominate, then size, then the site (-N,-N)
        self.corner_weight = 2 * self.n_sites + 2
        w = np.full(self.n_sites, 2, dtype=np.int64)
        w[self.corner_sites] += self.corner_weight
        w[self.corner_sites[0]] += 1
        self.site_weight = w
        self.total_weight = int(w.sum())
        assert self.total_weight % 2 == 1

    # -- lookups ----------------------------------------------------------------

    def vertex_index(self, X, Y):
        L = self.L
        return ((Y + L) // 2) * (L + 1) + (X + L) // 2

    def bond_id(self, bond: DualBond) -> int:
        try:
            return self.bond_index[bond]
        except KeyError:
            raise DomainError(f"{bond} is not an internal dual bond of Lambda({self.N})") from None

    def boundary_id(self, bond) -> int:
        if isinstance(bond, (int, np.integer)):
            if not 0 <= bond < self.n_boundary:
                raise DomainError(f"boundary index {bond} out of range")
            return int(bond)
        try:
            return self.boundary_index[bond]
        except KeyError:
            raise DomainError(f"{bond} is not a boundary dual bond of Lambda({self.N})") from None

    def corner_points(self):
        """Corners as half-integer points."""
        return [(x / 2, y / 2) for x, y in self.corners]

    def __repr__(self):
        return f"Volume(N={self.N})"


@functools.lru_cache(maxsize=None)
def build_volume(N: int) -> Volume:
    return Volume(N)


class BoundarySet:
    """A subset P of the boundary cycle with its interval decomposition and connected hull."""

    def __init__(self, volume: Volume, bonds: Iterable):
        self.volume = volume
        self.bonds = tuple(sorted({volume.boundary_id(b) for b in bonds}))

    def __len__(self):
        return len(self.bonds)

    def __iter__(self):
        return iter(self.bonds)

    def __eq__(self, other):
        return isinstance(other, BoundarySet) and other.volume.N == self.volume.N and other.bonds == self.bonds

    def __hash__(self):
        return hash((self.volume.N, self.bonds))

    def __repr__(self):
        return f"BoundarySet(N={self.volume.N}, bonds={list(self.bonds)})"

    def dual_bonds(self) -> List[DualBond]:
        return sorted(self.volume.boundary_bonds[k] for k in self.bonds)

    @functools.cached_property
    def intervals(self) -> List[Tuple[int, ...]]:
        """Maximal boundary intervals: runs whose exterior sites are l1-connected (runs break at corners)."""
        L = self.volume.L
        out, run = [], []
        for k in self.bonds:
            if run and k == run[-1] + 1 and k // L == run[-1] // L:
                run.append(k)
            else:
                if run:
                    out.append(tuple(run))
                run = [k]
        if run:
            out.append(tuple(run))
        return out

    @functools.cached_property
    def hull(self) -> "BoundarySet":
        return connected_hull(self, self.volume)

    @property
    def hull_len(self) -> int:
        return len(self.hull)

    def is_connected(self) -> bool:
        return len(self.bonds) > 0 and len(_gaps(self.bonds, self.volume.n_boundary)) <= 1

    def is_interval(self) -> bool:
        return len(self.intervals) == 1

    def corners(self) -> List[int]:
        """Corner indices (0..3) whose dual site is an endpoint of some bond in P."""
        v = self.volume
        M = v.n_boundary
        mine = set(self.bonds)
        return [i for i, k in enumerate(v.corner_ring_position) if k in mine or (k + 1) % M in mine]


def _gaps(bonds, M):
    """Maximal runs of missing indices on the cycle, as (first_missing, length)."""
    if not bonds:
        return [(0, M)]
    gaps = []
    for i, p in enumerate(bonds):
        q = bonds[(i + 1) % len(bonds)]
        length = (q - p - 1) % M
        if len(bonds) == 1:
            length = M - 1
        if length > 0:
            gaps.append(((p + 1) % M, length))
    return gaps


def _as_boundary_set(P, v: Volume) -> BoundarySet:
    if isinstance(P, BoundarySet):
        return P
    return BoundarySet(v, P)


def boundary_underline(P, v: Volume) -> set:
    """The exterior sites of the bonds in P (one per bond, never shared)."""
    P = _as_boundary_set(P, v)
    return {tuple(int(c) for c in v.boundary_outer[k]) for k in P.bonds}


def connected_hull(P, v: Volume) -> BoundarySet:
    """Smallest connected superset of P inside the boundary cycle, ties broken on the sorted bond list."""
    P = _as_boundary_set(P, v)
    if not P.bonds:
        raise DomainError("connected hull of an empty boundary set")
    M = v.n_boundary
    gaps = _gaps(P.bonds, M)
    if len(gaps) <= 1:
        return P
    best = None
    for start, length in gaps:
        keep = [k for k in range(M) if (k - start) % M >= length]
        cand = BoundarySet(v, keep)
        key = (len(cand), cand.dual_bonds())
        if best is None or key < best[0]:
            best = (key, cand)
    return best[1]


def _endpoints(bonds) -> np.ndarray:
    pts = []
    for b in bonds:
        pts.append(b.a)
        pts.append(b.b)
    if not pts:
        raise DomainError("distance between empty sets")
    return np.array(pts, dtype=np.int64)


def dual_distance(A, B) -> int:
    """Length of the shortest chain of dual bonds connecting A and B (0 iff they share a dual site)."""
    d = cdist(_endpoints(A), _endpoints(B), metric="cityblock").min()
    return int(round(d)) // 2


def site_distance(A, B) -> int:
    A, B = np.array(list(A), dtype=np.int64).reshape(-1, 2), np.array(list(B), dtype=np.int64).reshape(-1, 2)
    if len(A) == 0 or len(B) == 0:
        raise DomainError("distance between empty sets")
    return int(round(cdist(A, B, metric="cityblock").min()))


def corner_region(v: Volume, radius: float, corners=(0, 1, 2, 3)) -> BoundarySet:
    """Boundary bonds within dual distance `radius` of one of the given corners."""
    ends = v.boundary_endpoints.reshape(-1, 2)  # (2M, 2)
    pts = np.array([v.corners[c] for c in corners], dtype=np.int64).reshape(-1, 2)
    d = cdist(ends, pts, metric="cityblock").min(axis=1).reshape(-1, 2).min(axis=1) / 2
    return BoundarySet(v, np.nonzero(d <= radius)[0])
