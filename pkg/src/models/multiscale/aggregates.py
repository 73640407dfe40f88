""" Balanced contours and the decomposition of unbalanced ones into n- and corner aggregates """
import functools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from src.models.contour.contour import Contour, ContourClass
from src.models.contour.enumeration import enumerate_unbalanced_curves
from src.models.lattice import BoundarySet, Volume
from src.models.multiscale.schedule import ScaleSchedule
from src.utils.errors import DomainError
from src.utils.experiment import get_logger

log = get_logger(__name__)

CORNER = "corner"


def _l0(schedule):
    return schedule.l0 if isinstance(schedule, ScaleSchedule) else float(schedule)


def minus_sum(contour: Contour, eta) -> float:
    eta = np.asarray(eta, dtype=np.float64)
    return float(eta[list(contour.minus.bonds)].sum()) if len(contour.minus) else 0.0


def is_balanced(contour: Contour, eta, schedule: Union[ScaleSchedule, float]) -> bool:
    """sum of eta over the minus boundary >= -(1 - 1/l0) |Gamma|; bulk contours are balanced."""
    if contour.klass == ContourClass.BULK:
        return True
    return minus_sum(contour, eta) >= -(1.0 - 1.0 / _l0(schedule)) * len(contour)


def unbalanced_contours(volume: Volume, eta, schedule, census=None, max_length: Optional[int] = None) -> List[Contour]:
    """All unbalanced contours of the volume.

    With a census every boundary contour is screened; otherwise single-curve contours are
    enumerated up to `max_length` (default 2(2N+1)+8).
    """
    l0 = _l0(schedule)
    if census is not None:
        slope = 1.0 - 1.0 / l0
        ids = np.nonzero(census.minus_sums(eta) < -slope * census.lengths)[0]
        return [census.contour(int(i)) for i in ids]
    return enumerate_unbalanced_curves(volume, eta, l0, max_length=max_length)


def _bond_points(volume, contour):
    return volume.bond_endpoints[sorted(contour.key)].reshape(-1, 2)


@dataclass
class Aggregate:
    """A group of unbalanced contours expanded together.

    order  : level n >= 1, or "corner"
    corner : corner index 0..3 for corner aggregates
    scale  : L_n for normal aggregates, l_inf for corner ones
    """

    order: Union[int, str]
    contours: List[Contour]
    scale: float
    corner: Optional[int] = None
    flagged: bool = False
    domain: Optional[BoundarySet] = field(default=None, repr=False)

    @property
    def is_corner(self):
        return self.order == CORNER

    @property
    def volume(self) -> Volume:
        return self.contours[0].volume

    @functools.cached_property
    def boundary(self) -> BoundarySet:
        return BoundarySet(self.volume, [k for c in self.contours for k in c.boundary])

    @property
    def boundary_con(self) -> int:
        """ |dK|_con, the length of the connected hull of the aggregate boundary """
        return self.boundary.hull_len if len(self.boundary) else 0

    @property
    def label(self):
        return f"corner{self.corner}" if self.is_corner else f"level{self.order}"

    def __len__(self):
        return len(self.contours)

    def to_json(self):
        return {
            "order": self.order,
            "corner": self.corner,
            "flagged": self.flagged,
            "scale": self.scale,
            "boundary": list(self.boundary.bonds),
            "boundary_con": self.boundary_con,
            "domain": list(self.domain.bonds) if self.domain is not None else None,
            "contours": [c.to_json() for c in self.contours],
        }


@dataclass
class Decomposition:
    aggregates: List[Aggregate]
    pre_aggregates: Dict[int, List[List[Contour]]]
    schedule: ScaleSchedule

    @property
    def normal(self):
        return [a for a in self.aggregates if not a.is_corner]

    @property
    def corners(self):
        return [a for a in self.aggregates if a.is_corner]

    @property
    def flagged(self):
        return [a for a in self.aggregates if a.flagged]

    def level(self, n):
        return [a for a in self.aggregates if a.order == n]

    @property
    def max_level(self):
        return max((a.order for a in self.normal), default=0)

    def to_json(self):
        return {
            "schedule": self.schedule.to_json(),
            "aggregates": [a.to_json() for a in self.aggregates],
            "pre_aggregates": {str(n): [len(p) for p in pre] for n, pre in self.pre_aggregates.items()},
            "flagged": len(self.flagged),
        }


def _boundary_points(volume, bonds):
    return volume.boundary_endpoints[sorted(bonds)].reshape(-1, 2)


def domain_of(contours: Sequence[Contour], radius: float, volume: Volume) -> BoundarySet:
    """Boundary bonds within dual distance `radius` of the boundary of the contours."""
    own = sorted({k for c in contours for k in c.boundary})
    if not own:
        return BoundarySet(volume, [])
    ends = volume.boundary_endpoints.reshape(-1, 2)
    d = cdist(ends, _boundary_points(volume, own), metric="cityblock").min(axis=1).reshape(-1, 2).min(axis=1) / 2
    return BoundarySet(volume, sorted(set(np.nonzero(d <= radius)[0].tolist()) | set(own)))


def contour_distances(contours: Sequence[Contour], volume: Volume) -> np.ndarray:
    """ (k, k) dual distances between contours """
    pts = [_bond_points(volume, c) for c in contours]
    k = len(contours)
    D = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            D[i, j] = D[j, i] = cdist(pts[i], pts[j], metric="cityblock").min() / 2
    return D


def corner_distances(contours: Sequence[Contour], volume: Volume) -> np.ndarray:
    """ (k, 4) largest dual distance from a point of the contour boundary to each corner """
    corners = np.array(volume.corners, dtype=np.int64)
    out = np.full((len(contours), 4), np.inf)
    for i, c in enumerate(contours):
        if len(c.boundary):
            out[i] = cdist(_boundary_points(volume, c.boundary.bonds), corners, metric="cityblock").max(axis=0) / 2
    return out


def _components(D, scale, members):
    sub = D[np.ix_(members, members)]
    i, j = np.nonzero(sub <= scale)
    graph = coo_matrix((np.ones(len(i)), (i, j)), shape=(len(members), len(members)))
    _, labels = connected_components(graph, directed=False)
    return [[members[t] for t in np.nonzero(labels == c)[0]] for c in np.unique(labels)]


def decompose_aggregates(unbalanced: Sequence[Contour], schedule: ScaleSchedule, volume: Volume) -> Decomposition:
    """Level by level, maximal L_n-connected groups of the unassigned unbalanced contours with
    |dK|_con <= l_n whose boundary does not lie entirely within l_inf of a corner become
    n-aggregates. What is left after the last level joins the aggregate of its nearest corner;
    contours whose boundary is not within l_inf of any corner are flagged.
    """
    contours = sorted(set(unbalanced), key=lambda c: sorted(c.key))
    if any(c.volume.N != volume.N for c in contours):
        raise DomainError("contours belong to a different volume")
    if not contours:
        return Decomposition([], {}, schedule)
    D = contour_distances(contours, volume)
    C = corner_distances(contours, volume)
    l_inf = schedule.l_inf
    remaining = list(range(len(contours)))
    aggregates, pre = [], {}
    for n in range(1, schedule.levels + 1):
        if not remaining:
            break
        L_n, l_n = schedule.level(n)
        groups = _components(D, L_n, remaining)
        pre[n] = [[contours[i] for i in g] for g in groups]
        taken = set()
        for g in groups:
            agg = Aggregate(order=n, contours=[contours[i] for i in g], scale=L_n)
            if agg.boundary_con <= l_n and (C[g].max(axis=0) > l_inf).all():
                agg.domain = domain_of(agg.contours, L_n, volume)
                aggregates.append(agg)
                taken.update(g)
        remaining = [i for i in remaining if i not in taken]

    by_corner: Dict[int, List[int]] = {}
    for i in remaining:
        by_corner.setdefault(int(np.argmin(C[i])), []).append(i)
    for corner in sorted(by_corner):
        members = by_corner[corner]
        flagged = bool(C[members, corner].max() > l_inf)
        agg = Aggregate(order=CORNER, contours=[contours[i] for i in members], scale=l_inf, corner=corner, flagged=flagged)
        agg.domain = domain_of(agg.contours, l_inf, volume)
        if flagged:
            log.warning(f"corner aggregate {corner} holds contours reaching farther than l_inf={l_inf:.3g} from the corner")
        aggregates.append(agg)
    log.debug(f"{len(contours)} unbalanced contours -> {len(aggregates)} aggregates")
    return Decomposition(aggregates, pre, schedule)
