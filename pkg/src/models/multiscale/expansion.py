""" The sequential expansion of log Z^+ on a finite volume.

Writing the contour model as

    Z^+ = exp(-E(empty)) sum_F rho(F) Z_0(F)

with F running over families of unbalanced contours and Z_0(F) the partition function of
the balanced (and bulk) contours compatible with F, each stage (the n-aggregates of a level,
then the corner aggregates) is summed out in turn:

    I_0(F)  = Z_0(F) / Z_0(empty)
    J_s(F') = sum over d in the stage of rho(d) I_{s-1}(d u F') / prod_a Zhat_a
    psi_s   = log J_s(empty),  I_s = J_s / J_s(empty)

Every stage is an exact resummation, so

    log Z^+ = -E(empty) + sum phi_0 + sum_s (psi_s + sum_a log Zhat_a)

for any choice of the renormalized weights rho-hat entering Zhat. rho-hat absorbs the short
clusters of balanced polymers incompatible with the family; the remaining interaction ends up
in psi_s.

Z_0 is the partition function of the 0-cluster polymer system, so log Z_0(F) is the sum of
phi_0 over the 0-clusters compatible with F. psi_s = log E[G(d)] over the product of the
aggregate measures is the log partition function of a cluster model whose polymers are the
interactions between aggregates and whose weights are Mayer weights. The census gives the same
tables by direct counting: a cross-check when the 0-cluster pool holds every balanced contour,
and the source of Z_0 when it does not. Both bound exact expansions to N <= 2.
"""
import functools
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from src.models.clusterexp import ClusterWeightTable, PolymerSystem, bits_of, mask_of, partition_function, truncated_weights
from src.models.contour.contour import Contour, compatible, contour_weight, vacuum_energy
from src.models.contour.enumeration import enumerate_closed_curves
from src.models.ising import CouplingParams, as_eta
from src.models.lattice import Volume
from src.models.multiscale.aggregates import Aggregate, Decomposition, decompose_aggregates
from src.models.multiscale.mayer import MAX_JOINT_STATES, StageClusters, stage_clusters
from src.models.multiscale.schedule import ScaleSchedule
from src.utils.errors import CapExceededError
from src.utils.experiment import get_logger

log = get_logger(__name__)

MAX_FAMILIES = 1 << 18
POLYMERS = 20
CLUSTER_SIZE = 4
STEP_ZERO_POLYMERS = 128
STEP_ZERO_CLUSTER_SIZE = 2


# -- step zero -----------------------------------------------------------------


def phi0_table(polymers: Sequence[Contour], eta, params: CouplingParams, max_size=CLUSTER_SIZE):
    """Cluster expansion of the polymer model on an explicit set of balanced contours.

    Returns (system, table) with table[mask] = phi_0 of the cluster `mask` over `polymers`.
    """
    polymers = list(polymers)
    k = len(polymers)
    inc = np.eye(k, dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            inc[i, j] = inc[j, i] = not compatible(polymers[i], polymers[j])
    z = np.exp([contour_weight(c, eta, params) for c in polymers]) if k else np.zeros(0)
    system = PolymerSystem(inc, z=z)
    if not k:
        return system, ClusterWeightTable({}, 0, 0)
    return system, truncated_weights(system, min(max_size, k))


@dataclass
class StepZero:
    """The 0-clusters: the polymer model of the balanced boundary contours and the bulk contours.

    phi0 holds phi_0 per cluster over `polymers` (up to the table's cluster size). When the
    pool is complete it holds every balanced contour, phi0_total = log Z_0(empty) is the sum of
    phi_0 over all 0-clusters and log_Z0 comes from the same polymer system; otherwise both come
    from the census and `residual` is the part of phi0_total no listed cluster accounts for.
    The census values are kept as a cross-check either way.
    """

    vacuum: float
    phi0_total: float
    log_Z0: Dict[frozenset, float] = field(repr=False)
    ids: np.ndarray = field(repr=False)  # census ids of the unbalanced contours
    contours: List[Contour] = field(repr=False)
    system: Optional[PolymerSystem] = field(default=None, repr=False)
    phi0: Optional[ClusterWeightTable] = field(default=None, repr=False)
    polymers: List[Contour] = field(default_factory=list, repr=False)
    complete: bool = False
    phi0_clusters: float = 0.0
    census_total: float = 0.0
    census_discrepancy: float = 0.0  # largest |log Z_0(F) polymer system - census| over F

    @property
    def residual(self):
        return self.phi0_total - self.phi0_clusters

    @property
    def truncated(self):
        return not self.complete

    def to_json(self):
        return {
            "complete": self.complete,
            "polymers": len(self.polymers),
            "clusters": len(self.phi0) if self.phi0 is not None else 0,
            "phi0_clusters": self.phi0_clusters,
            "residual": self.residual,
            "census_total": self.census_total,
            "census_discrepancy": self.census_discrepancy,
        }


def _step_zero_pool(volume, eta, census, schedule, balanced, max_polymers):
    """(polymers, complete): every balanced contour when they fit, else the shortest ones."""
    if balanced <= max_polymers:
        scale = volume.n_bonds + 1
        pool = list(itertools.islice(_balanced_candidates(volume, eta, scale, census, schedule.l0), max_polymers + 1))
        if len(pool) <= max_polymers:
            return pool, True
    else:
        scale = max(2.0 * schedule.l_inf, float(schedule.l0))
        pool = list(itertools.islice(_balanced_candidates(volume, eta, scale, census, schedule.l0), max_polymers))
    return pool[:max_polymers], False


def _log_Z0_of(system: PolymerSystem, polymers: Sequence[Contour], families, contours: Dict[int, Contour]) -> Dict[frozenset, float]:
    """log Z_0(F) for each family F of unbalanced contour ids: the polymers compatible with all of F."""
    allows = {i: mask_of(j for j, p in enumerate(polymers) if compatible(p, c)) for i, c in contours.items()}
    out = {}
    for F in families:
        allowed = system.full
        for i in F:
            allowed &= allows[i]
        out[F] = float(np.log(partition_function(system, allowed)))
    return out


def step_zero_expansion(
    volume: Volume,
    eta,
    params: CouplingParams,
    schedule: ScaleSchedule,
    census=None,
    max_polymers=STEP_ZERO_POLYMERS,
    max_size=STEP_ZERO_CLUSTER_SIZE,
) -> StepZero:
    eta = as_eta(eta, volume)
    census = census if census is not None else _census(volume)
    slope = 1.0 - 1.0 / schedule.l0
    unbalanced = census.minus_sums(eta) < -slope * census.lengths
    ids = np.nonzero(unbalanced)[0]
    census_Z0 = census.restricted_log_partitions(eta, params.beta, params.lam, unbalanced)

    polymers, complete = _step_zero_pool(volume, eta, census, schedule, int((~unbalanced).sum()), max_polymers)
    system, phi0 = phi0_table(polymers, eta, params, max_size=max_size)
    contours = {int(i): census.contour(int(i)) for i in ids}
    if complete:
        log_Z0 = _log_Z0_of(system, polymers, census_Z0, contours)
        discrepancy = max(abs(log_Z0[F] - census_Z0[F]) for F in census_Z0)
        if discrepancy > 1e-8:
            log.warning(f"N={volume.N}: 0-cluster polymer system and census disagree on log Z_0 by {discrepancy:.3g}")
        phi0_clusters = log_Z0[frozenset()]
    else:
        log.debug(f"N={volume.N}: 0-clusters over the {len(polymers)} shortest balanced contours, census for the rest")
        log_Z0, discrepancy = census_Z0, math.nan
        phi0_clusters = float(np.real(sum(v for _, v in phi0.items())))
    return StepZero(
        vacuum=-vacuum_energy(eta, params),
        phi0_total=log_Z0[frozenset()],
        log_Z0=log_Z0,
        ids=ids,
        contours=[contours[int(i)] for i in ids],
        system=system,
        phi0=phi0,
        polymers=polymers,
        complete=complete,
        phi0_clusters=phi0_clusters,
        census_total=census_Z0[frozenset()],
        census_discrepancy=discrepancy,
    )


def _census(volume):
    from src.dataloaders.census import load_census

    return load_census(volume.N)


# -- renormalized weights -----------------------------------------------------------


@dataclass
class ShortClusters:
    """Clusters of balanced polymers shorter than `scale` that touch a given set of contours."""

    polymers: List[Contour]
    table: ClusterWeightTable = field(repr=False)
    scale: float
    truncated: bool = False

    @functools.cached_property
    def lengths(self):
        return np.array([len(c) for c in self.polymers], dtype=np.int64)

    def clusters(self):
        """ [(mask over polymers, phi)] with |C| < scale """
        return [(m, float(np.real(v))) for m, v in self.table.items() if self.lengths[bits_of(m)].sum() < self.scale]

    def touching(self, contours: Sequence[Contour]):
        """ [(phi, bitmask over `contours` of the members incompatible with the cluster)] """
        rows = [sum(1 << j for j, c in enumerate(contours) if not compatible(p, c)) for p in self.polymers]
        out = []
        for m, phi in self.clusters():
            touch = 0
            for i in bits_of(m):
                touch |= rows[i]
            if touch:
                out.append((phi, touch))
        return out


def _balanced_candidates(volume, eta, scale, census, l0):
    """Balanced boundary contours and bulk contours strictly shorter than scale, shortest first."""
    cands = []
    if census is not None:
        slope = 1.0 - 1.0 / l0
        ok = (census.minus_sums(eta) >= -slope * census.lengths) & (census.lengths < scale)
        for i in np.nonzero(ok)[0]:
            cands.append((int(census.lengths[i]), "b", int(i)))
    max_closed = int(np.ceil(scale)) - 1
    if max_closed >= 4:
        for g in enumerate_closed_curves(volume, max_closed):
            cands.append((len(g), "c", g))
    cands.sort(key=lambda t: (t[0], t[1], sorted(t[2].bonds) if t[1] == "c" else t[2]))
    for _, kind, item in cands:
        yield census.contour(item) if kind == "b" else Contour([item])


def short_clusters(
    volume: Volume,
    eta,
    params: CouplingParams,
    scale: float,
    near: Sequence[Contour],
    l0: float,
    census=None,
    max_polymers=POLYMERS,
    max_size=CLUSTER_SIZE,
) -> ShortClusters:
    """The short clusters that can renormalize the weights of `near`.

    Polymers are balanced contours shorter than `scale` incompatible with a contour of
    `near`, shortest first, at most `max_polymers` of them.
    """
    pool, truncated = [], False
    if scale > 1:
        for c in _balanced_candidates(volume, eta, scale, census, l0):
            if any(not compatible(c, a) for a in near):
                if len(pool) == max_polymers:
                    truncated = True
                    break
                pool.append(c)
    _, table = phi0_table(pool, eta, params, max_size=max_size)
    if truncated:
        log.debug(f"short-cluster pool capped at {max_polymers} polymers (scale {scale:.3g})")
    return ShortClusters(polymers=pool, table=table, scale=scale, truncated=truncated)


# -- aggregates --------------------------------------------------------------------


def compatible_families(contours: Sequence[Contour]) -> List[int]:
    """Every pairwise compatible subset (as a bitmask), the empty one included."""
    k = len(contours)
    nb = [0] * k
    for i in range(k):
        for j in range(i + 1, k):
            if not compatible(contours[i], contours[j]):
                nb[i] |= 1 << j
                nb[j] |= 1 << i
    out = []

    def rec(i, chosen, blocked):
        if len(out) > MAX_FAMILIES:
            raise CapExceededError(f"aggregate of {k} contours has more than {MAX_FAMILIES} compatible families")
        if i == k:
            out.append(chosen)
            return
        rec(i + 1, chosen, blocked)
        if not blocked >> i & 1:
            rec(i + 1, chosen | (1 << i), blocked | nb[i])

    rec(0, 0, 0)
    return out


@dataclass
class AggregateMeasure:
    """The renormalized weights rho-hat over the compatible families of one aggregate."""

    aggregate: Aggregate
    families: List[int]
    log_weights: np.ndarray
    short: Optional[ShortClusters] = None

    @property
    def log_Z(self) -> float:
        return float(logsumexp(self.log_weights))

    @property
    def probabilities(self):
        return np.exp(self.log_weights - self.log_Z)


def aggregate_measure(aggregate: Aggregate, eta, params: CouplingParams, short: Optional[ShortClusters] = None) -> AggregateMeasure:
    contours = aggregate.contours
    log_rho = np.array([contour_weight(c, eta, params) for c in contours])
    families = compatible_families(contours)
    touching = short.touching(contours) if short is not None else []
    lw = np.empty(len(families))
    for f, fam in enumerate(families):
        members = bits_of(fam)
        lw[f] = log_rho[members].sum() - sum(phi for phi, touch in touching if touch & fam)
    return AggregateMeasure(aggregate, families, lw, short)


def _stage_scale(aggregate: Aggregate, schedule: ScaleSchedule):
    return 2.0 * schedule.l_inf if aggregate.is_corner else aggregate.scale


def aggregate_logZ(
    aggregate: Aggregate,
    eta,
    params: CouplingParams,
    schedule: Optional[ScaleSchedule] = None,
    census=None,
    max_polymers=POLYMERS,
    max_size=CLUSTER_SIZE,
) -> float:
    """log Zhat: the sum of rho-hat over the compatible families of the aggregate.

    Without a schedule rho-hat = rho; with one, clusters shorter than L_n (2 l_inf for corner
    aggregates) are absorbed.
    """
    if not len(aggregate):
        return 0.0
    eta = as_eta(eta, aggregate.volume)
    short = None
    if schedule is not None:
        short = short_clusters(
            aggregate.volume, eta, params, _stage_scale(aggregate, schedule), aggregate.contours, schedule.l0,
            census=census, max_polymers=max_polymers, max_size=max_size,
        )
    return aggregate_measure(aggregate, eta, params, short).log_Z


# -- the report ----------------------------------------------------------------------


@dataclass
class AggregateTerm:
    label: str
    log_Zhat: float
    n_contours: int
    boundary_len: int
    boundary_con: int
    domain: List[int]
    flagged: bool = False
    short_truncated: bool = False

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class StageTerm:
    """psi from the stage cluster model; psi_direct sums the family tables directly.

    Without a cluster model (a joint family that never occurs, or a cap) psi = psi_direct.
    """

    order: object  # level n, or "corner"
    psi: float
    aggregates: List[AggregateTerm]
    psi_direct: float = math.nan
    clusters: Optional[StageClusters] = field(default=None, repr=False)

    @property
    def log_Zhat(self):
        return float(sum(a.log_Zhat for a in self.aggregates))

    def to_json(self):
        return {
            "order": self.order,
            "psi": self.psi,
            "psi_direct": self.psi_direct,
            "clusters": self.clusters.to_json() if self.clusters is not None else None,
            "aggregates": [a.to_json() for a in self.aggregates],
        }


@dataclass
class ExpansionReport:
    N: int
    beta: float
    lam: float
    sign: int
    vacuum: float
    phi0_total: float
    stages: List[StageTerm]
    decomposition: Decomposition = field(repr=False)
    eta: np.ndarray = field(repr=False)
    residual_bound: float = 0.0  # |phi_0 not covered by listed 0-clusters| when the pool is incomplete
    step_zero: Optional[StepZero] = field(default=None, repr=False)

    @property
    def psi_n_totals(self) -> Dict[int, float]:
        return {s.order: s.psi for s in self.stages if s.order != "corner"}

    @property
    def psi_inf(self) -> float:
        return float(sum(s.psi for s in self.stages if s.order == "corner"))

    @property
    def normal_terms(self) -> List[AggregateTerm]:
        return [a for s in self.stages if s.order != "corner" for a in s.aggregates]

    @property
    def corner_terms(self) -> List[AggregateTerm]:
        return [a for s in self.stages if s.order == "corner" for a in s.aggregates]

    @property
    def truncated(self):
        """Whether some short-cluster pool hit its cap; the total stays exact either way."""
        return any(a.short_truncated for s in self.stages for a in s.aggregates)

    @property
    def log_Z(self) -> float:
        return float(
            self.vacuum + self.phi0_total + sum(self.psi_n_totals.values()) + self.psi_inf
            + sum(a.log_Zhat for a in self.normal_terms) + sum(a.log_Zhat for a in self.corner_terms)
        )

    def terms(self):
        """The expansion slot by slot."""
        return {
            "vacuum": self.vacuum,
            "clusters_step_zero": self.phi0_total,
            "psi_levels": {str(n): v for n, v in self.psi_n_totals.items()},
            "psi_corner": self.psi_inf,
            "log_Zhat_levels": sum(a.log_Zhat for a in self.normal_terms),
            "log_Zhat_corner": sum(a.log_Zhat for a in self.corner_terms),
        }

    def to_json(self):
        return {
            "N": self.N,
            "beta": self.beta,
            "lam": self.lam,
            "sign": self.sign,
            "terms": self.terms(),
            "stages": [s.to_json() for s in self.stages],
            "log_Z": self.log_Z,
            "truncated": self.truncated,
            "residual_bound": self.residual_bound,
            "step_zero": self.step_zero.to_json() if self.step_zero is not None else None,
            "schedule": self.decomposition.schedule.to_json(),
        }


def _stages(decomposition: Decomposition):
    for n in range(1, decomposition.max_level + 1):
        aggs = decomposition.level(n)
        if aggs:
            yield n, aggs
    if decomposition.corners:
        yield "corner", decomposition.corners


def _stage_log_G(measures: Sequence[AggregateMeasure], log_I, id_of, log_rho) -> Optional[np.ndarray]:
    """log G(d) = log I(d) + log rho(d) - log rho-hat(d) over the joint families of a stage.

    Axis a runs over the families of aggregate a, index 0 being the empty family. None when
    some joint family never occurs (G would vanish there).
    """
    sizes = [len(m.families) for m in measures]
    if math.prod(sizes) > MAX_JOINT_STATES:
        raise CapExceededError(f"stage with {math.prod(sizes)} joint aggregate states")
    ids, corr = [], []
    for m in measures:
        contours = m.aggregate.contours
        fams = [frozenset(id_of[contours[j]] for j in bits_of(fam)) for fam in m.families]
        ids.append(fams)
        corr.append(np.array([log_rho[sorted(F)].sum() for F in fams]) - m.log_weights)
    log_G = np.empty(sizes)
    for pick in itertools.product(*(range(s) for s in sizes)):
        F = frozenset().union(*(ids[a][i] for a, i in enumerate(pick)))
        if F not in log_I:
            return None
        log_G[pick] = log_I[F] + sum(corr[a][i] for a, i in enumerate(pick))
    return log_G


def _stage_psi(order, measures, log_I, id_of, log_rho, psi_direct):
    """(psi, clusters) from the stage cluster model, or (psi_direct, None) when there is none."""
    try:
        log_G = _stage_log_G(measures, log_I, id_of, log_rho)
        if log_G is None:
            log.debug(f"stage {order}: a joint family never occurs, psi from the family tables")
            return psi_direct, None
        # expand around the most likely joint family so that E[G / G(ref)] >= mu(ref)
        ref = tuple(int(np.argmax(m.probabilities)) for m in measures)
        g0 = float(log_G[ref])
        clusters = stage_clusters(measures, log_G - g0, ref)
    except CapExceededError as e:
        log.debug(f"stage {order}: {e}; psi from the family tables")
        return psi_direct, None
    psi = g0 + clusters.psi
    if abs(psi - psi_direct) > 1e-8 * max(1.0, abs(psi_direct)):
        log.warning(f"stage {order}: cluster model psi {psi:.10g} differs from the direct sum {psi_direct:.10g}")
    return psi, clusters


def sequential_expansion(
    volume: Volume,
    eta,
    params: CouplingParams,
    schedule: ScaleSchedule,
    census=None,
    sign: int = 1,
    max_polymers=POLYMERS,
    max_size=CLUSTER_SIZE,
) -> ExpansionReport:
    """Expansion of log Z^{sign}; the minus case is the plus expansion under -eta."""
    eta = sign * as_eta(eta, volume)
    census = census if census is not None else _census(volume)
    zero = step_zero_expansion(volume, eta, params, schedule, census=census)
    id_of = {c: int(i) for c, i in zip(zero.contours, zero.ids)}
    decomposition = decompose_aggregates(zero.contours, schedule, volume)
    log_rho = census.log_rho(eta, params.beta, params.lam)

    log_I = {F: v - zero.phi0_total for F, v in zero.log_Z0.items()}
    stages = []
    for order, aggs in _stages(decomposition):
        terms, measures, stage_ids = [], [], set()
        for agg in aggs:
            short = short_clusters(
                volume, eta, params, _stage_scale(agg, schedule), agg.contours, schedule.l0,
                census=census, max_polymers=max_polymers, max_size=max_size,
            )
            measure = aggregate_measure(agg, eta, params, short)
            measures.append(measure)
            terms.append(
                AggregateTerm(
                    label=agg.label,
                    log_Zhat=measure.log_Z,
                    n_contours=len(agg),
                    boundary_len=len(agg.boundary),
                    boundary_con=agg.boundary_con,
                    domain=list(agg.domain.bonds) if agg.domain is not None else [],
                    flagged=agg.flagged,
                    short_truncated=short.truncated,
                )
            )
            stage_ids.update(id_of[c] for c in agg.contours)
        grouped = defaultdict(list)
        for F, v in log_I.items():
            inside = [i for i in F if i in stage_ids]
            grouped[F.difference(inside)].append(v + log_rho[inside].sum())
        log_zhat = sum(t.log_Zhat for t in terms)
        log_J = {F: float(logsumexp(vals)) - log_zhat for F, vals in grouped.items()}
        psi_direct = log_J[frozenset()]
        psi, clusters = _stage_psi(order, measures, log_I, id_of, log_rho, psi_direct)
        log_I = {F: v - psi_direct for F, v in log_J.items()}
        stages.append(StageTerm(order=order, psi=psi, aggregates=terms, psi_direct=psi_direct, clusters=clusters))
        log.debug(f"stage {order}: {len(aggs)} aggregates, psi = {psi:.6g}")
    assert set(log_I) == {frozenset()}, "unbalanced contours left after the corner stage"

    return ExpansionReport(
        N=volume.N,
        beta=params.beta,
        lam=params.lam,
        sign=sign,
        vacuum=zero.vacuum,
        phi0_total=zero.phi0_total,
        stages=stages,
        decomposition=decomposition,
        eta=eta,
        residual_bound=0.0 if zero.complete else abs(zero.residual),
        step_zero=zero,
    )
