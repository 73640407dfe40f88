""" Depth-first enumeration of single pre-contours up to a length cap.

A path may visit a dual vertex twice only if both passages use one of the rounded
arm pairs (N, E) / (S, W); then the rounding split of its bond set returns the path itself.
"""
from typing import List, Optional

import numpy as np

from src.models.contour.contour import ROUNDED_PAIRS, Contour
from src.models.contour.precontour import PreContour
from src.models.lattice import OPPOSITE, Volume
from src.utils.errors import CapExceededError
from src.utils.experiment import get_logger

log = get_logger(__name__)

MAX_CURVES = 2_000_000


def _dual_steps(volume, u, w):
    a, b = volume.vertex_coords[u], volume.vertex_coords[w]
    return (abs(int(a[0]) - int(b[0])) + abs(int(a[1]) - int(b[1]))) // 2


def _pair_allowed(visits, pair):
    if not visits:
        return True
    if len(visits) > 1:
        return False
    return visits[0] in ROUNDED_PAIRS and pair in ROUNDED_PAIRS and pair != visits[0]


class _Search:
    def __init__(self, volume: Volume, max_length: int):
        self.v = volume
        self.max_length = max_length
        self.found = []

    def _push(self, bonds, vertices):
        if len(self.found) >= MAX_CURVES:
            raise CapExceededError(f"more than {MAX_CURVES} curves below length {self.max_length}")
        self.found.append(PreContour(self.v, list(bonds), list(vertices)))

    def closed_from(self, first):
        v = self.v
        start, d0 = int(v.bond_vertex[first, 0]), int(v.bond_direction[first, 0])
        bonds, vertices, used, visits = [first], [start], {first}, {}
        vertices.append(int(v.arm_vertex[start, d0]))

        def step(vertex, came):
            if vertex == start and len(bonds) >= 4:
                closing = frozenset((came, d0))
                middle = visits.get(start, [])
                if not middle or (middle[0] in ROUNDED_PAIRS and closing in ROUNDED_PAIRS):
                    self._push(bonds, vertices)
            for d in range(4):
                b = int(v.arm_bond[vertex, d])
                if d == came or b < 0 or b in used or b < first:
                    continue
                pair = frozenset((came, d))
                if vertex == start and pair not in ROUNDED_PAIRS:
                    continue
                if not _pair_allowed(visits.get(vertex, []), pair):
                    continue
                nxt = int(v.arm_vertex[vertex, d])
                if len(bonds) + 1 + _dual_steps(v, nxt, start) > self.max_length:
                    continue
                visits.setdefault(vertex, []).append(pair)
                used.add(b); bonds.append(b); vertices.append(nxt)
                step(nxt, OPPOSITE[d])
                vertices.pop(); bonds.pop(); used.discard(b)
                visits[vertex].pop()

        step(vertices[-1], OPPOSITE[d0])

    def open_from(self, ring_vertex, allowance=None):
        """allowance: optional (targets (T,) ring vertices, max lengths (T,))"""
        v = self.v
        pos0 = v.ring_position[ring_vertex]
        d0 = int(np.argmax(v.arm_bond[ring_vertex] >= 0))
        first = int(v.arm_bond[ring_vertex, d0])
        bonds, vertices, used, visits = [first], [ring_vertex], {first}, {}
        vertices.append(int(v.arm_vertex[ring_vertex, d0]))
        if allowance is not None:
            targets, budget = allowance
            coords = v.vertex_coords[targets]

        def reachable(vertex, length):
            if allowance is None:
                return length <= self.max_length
            c = v.vertex_coords[vertex]
            steps = np.abs(coords - c).sum(axis=1) // 2
            return bool(np.any(length + steps <= budget))

        def step(vertex, came):
            if v.is_ring[vertex]:
                if v.ring_position[vertex] > pos0:
                    self._push(bonds, vertices)
                return
            for d in range(4):
                b = int(v.arm_bond[vertex, d])
                if d == came or b < 0 or b in used:
                    continue
                pair = frozenset((came, d))
                if not _pair_allowed(visits.get(vertex, []), pair):
                    continue
                nxt = int(v.arm_vertex[vertex, d])
                if not reachable(nxt, len(bonds) + 1):
                    continue
                visits.setdefault(vertex, []).append(pair)
                used.add(b); bonds.append(b); vertices.append(nxt)
                step(nxt, OPPOSITE[d])
                vertices.pop(); bonds.pop(); used.discard(b)
                visits[vertex].pop()

        step(vertices[-1], OPPOSITE[d0])


def enumerate_closed_curves(volume: Volume, max_length: int) -> List[PreContour]:
    """Every closed pre-contour with at most max_length bonds (each curve once)."""
    search = _Search(volume, max_length)
    for b in range(volume.n_bonds):
        search.closed_from(b)
    return search.found


def enumerate_open_curves(volume: Volume, max_length: int, allowance=None) -> List[PreContour]:
    """Every open pre-contour with at most max_length bonds.

    allowance: optional callable(ring vertex) -> (targets, max lengths) or None. Curves from
    that start then end only at the targets, each within its own budget; None skips the start.
    """
    search = _Search(volume, max_length)
    for r in volume.ring_vertices:
        if volume.is_corner[r]:
            continue
        if allowance is None:
            search.open_from(int(r))
        elif (budget := allowance(int(r))) is not None:
            search.open_from(int(r), budget)
    return search.found


def _arc_sums(eta, start, end, M):
    """ eta summed over the two boundary arcs cut off by ring positions start < end """
    inner = eta[start + 1:end + 1].sum()
    return inner, eta.sum() - inner


def enumerate_unbalanced_curves(volume: Volume, eta, l0: float, max_length: Optional[int] = None) -> List[Contour]:
    """Single-curve boundary contours that are unbalanced for eta.

    A single open curve realizes with its whole boundary on the minus side, so it is
    unbalanced iff its length is below -S / (1 - 1/l0), S the eta sum over the interior arc.
    The arc sums give a per-target length allowance that prunes the search.
    """
    eta = np.asarray(eta, dtype=np.float64)
    M = volume.n_boundary
    slope = 1.0 - 1.0 / l0
    cap = max_length if max_length is not None else 2 * volume.L + 8
    ring = [int(r) for r in volume.ring_vertices if not volume.is_corner[r]]

    def allowance(r):
        a = volume.ring_position[r]
        targets, budget = [], []
        for t in ring:
            b = volume.ring_position[t]
            if b <= a:
                continue
            worst = -min(_arc_sums(eta, a, b, M))
            allow = min(cap, int(np.ceil(worst / slope)) - 1) if worst > 0 else -1
            if allow >= 1:
                targets.append(t)
                budget.append(allow)
        return (np.array(targets), np.array(budget)) if targets else None

    found = enumerate_open_curves(volume, cap, allowance)
    out = []
    for g in found:
        c = Contour([g])
        s = eta[list(c.minus.bonds)].sum()
        if s < -slope * len(c):
            out.append(c)
    log.debug(f"{len(out)} unbalanced single-curve contours out of {len(found)} candidates")
    return out
