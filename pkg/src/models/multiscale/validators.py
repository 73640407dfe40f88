""" Numeric checks of the inequalities the expansion relies on.

Every check takes a Scenario and returns Margins written as lhs <= rhs. A violated inequality
is a negative margin, never an exception.
"""
import functools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from src.models.contour.contour import Contour, ContourClass
from src.models.contour.enumeration import enumerate_closed_curves
from src.models.functional.enumerate import pack_bits, unpack_bits
from src.models.ising import CouplingParams, as_eta
from src.models.lattice import BoundarySet, Volume
from src.models.multiscale.aggregates import decompose_aggregates, is_balanced, unbalanced_contours
from src.models.multiscale.expansion import ExpansionReport, phi0_table, sequential_expansion
from src.models.multiscale.mayer import MayerCluster, mayer_bound, mayer_weight, n_components
from src.models.multiscale.schedule import ScaleSchedule
from src.models.clusterexp import bits_of
from src.utils import registry
from src.utils.config import instantiate
from src.utils.errors import DomainError
from src.utils.experiment import get_logger

log = get_logger(__name__)

TOL = 1e-12


@dataclass
class Margin:
    name: str
    subject: str
    lhs: float
    rhs: float

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def holds(self):
        return self.lhs <= self.rhs + TOL

    def to_json(self):
        return {"name": self.name, "subject": self.subject, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin, "holds": self.holds}


@dataclass
class Scenario:
    volume: Volume
    eta: np.ndarray
    params: CouplingParams
    schedule: ScaleSchedule
    census: object = None
    contours: Optional[List[Contour]] = None  # explicit contours instead of the full unbalanced set
    ensemble: object = None
    seed: int = 0
    samples: int = 64
    max_polymers: int = 20
    cluster_size: int = 4
    _report: Optional[ExpansionReport] = field(default=None, repr=False)

    def __post_init__(self):
        self.eta = as_eta(self.eta, self.volume)

    @functools.cached_property
    def unbalanced(self) -> List[Contour]:
        if self.contours is not None:
            return [c for c in self.contours if not is_balanced(c, self.eta, self.schedule)]
        return unbalanced_contours(self.volume, self.eta, self.schedule, census=self.census)

    @property
    def report(self) -> ExpansionReport:
        if self._report is None:
            self._report = sequential_expansion(
                self.volume, self.eta, self.params, self.schedule, census=self.census,
                max_polymers=self.max_polymers, max_size=self.cluster_size,
            )
        return self._report


def _subject(c: Contour):
    return f"contour len={len(c)} boundary={list(c.boundary.bonds)}"


def _eta_sum(eta, bonds):
    return float(eta[list(bonds)].sum()) if len(bonds) else 0.0


# -- geometry of unbalanced contours --------------------------------------------------------


def check_geom_balanced(scenario: Scenario) -> List[Margin]:
    """Unbalanced small boundary contours: sum of eta over dG <= -(1 - 2/l0)|dG| and l0 h(G) <= |dG|."""
    l0, eta = scenario.schedule.l0, scenario.eta
    out = []
    for c in scenario.unbalanced:
        if c.klass not in (ContourClass.SIMPLE_SMALL, ContourClass.CORNER_SMALL):
            continue
        nb = len(c.boundary)
        out.append(Margin("geom_balanced.field", _subject(c), _eta_sum(eta, c.boundary.bonds), -(1.0 - 2.0 / l0) * nb))
        out.append(Margin("geom_balanced.height", _subject(c), l0 * c.height(), float(nb)))
    return out


def check_geom_large(scenario: Scenario) -> List[Margin]:
    """Large boundary contours: 2N + |d+G| <= |G|; unbalanced ones also have sum over dG of eta <= -2N(1 - 3/l0)."""
    N, l0, eta = scenario.volume.N, scenario.schedule.l0, scenario.eta
    pool = scenario.contours if scenario.contours is not None else scenario.unbalanced
    out = []
    for c in pool:
        if c.klass != ContourClass.LARGE_BOUNDARY:
            continue
        out.append(Margin("geom_large.length", _subject(c), 2.0 * N + len(c.plus), float(len(c))))
        if not is_balanced(c, eta, l0):
            out.append(Margin("geom_large.field", _subject(c), _eta_sum(eta, c.boundary.bonds), -2.0 * N * (1.0 - 3.0 / l0)))
    return out


# -- entropy ---------------------------------------------------------------------------


def _vertex_bits(volume: Volume, masks):
    """ (K,) packed dual-vertex sets of bond masks (K, n_bonds) """
    inc = np.zeros((volume.n_bonds, volume.n_vertices), dtype=np.int64)
    inc[np.arange(volume.n_bonds), volume.bond_vertex[:, 0]] = 1
    inc[np.arange(volume.n_bonds), volume.bond_vertex[:, 1]] = 1
    return pack_bits((masks.astype(np.int64) @ inc) > 0)


def check_entropy(scenario: Scenario, c1: float = 6 * math.log(4), closed_max_length: int = 8) -> List[Margin]:
    """#{G' : |G'| = n, G' incompatible with G} <= |G| e^{c1 n} for every G and n.

    Contours meeting G in a dual vertex or a boundary bond are counted, a superset of the
    incompatible ones. Needs the census for the boundary contours; bulk contours are the
    closed curves up to `closed_max_length`. One margin per n, for the worst G.
    """
    v, census = scenario.volume, scenario.census
    if census is None:
        raise DomainError("the entropy check needs the census of the volume")
    if v.n_vertices > 64:
        raise DomainError("vertex bitsets hold at most 64 dual vertices")
    masks = [unpack_bits(census.keys, v.n_bonds)]
    bnd = [census.boundary]
    closed = enumerate_closed_curves(v, closed_max_length)
    if closed:
        cm = np.zeros((len(closed), v.n_bonds), dtype=bool)
        for i, g in enumerate(closed):
            cm[i, list(g.bonds)] = True
        masks.append(cm)
        bnd.append(np.zeros(len(closed), dtype=np.uint64))
    masks = np.concatenate(masks)
    bnd = np.concatenate(bnd)
    vert = _vertex_bits(v, masks)
    lengths = masks.sum(axis=1)
    n_max = int(lengths.max())
    worst = {}
    for start in range(0, len(vert), 1024):
        sl = slice(start, start + 1024)
        touch = ((vert[sl, None] & vert[None, :]) | (bnd[sl, None] & bnd[None, :])) != 0  # (k, K)
        counts = np.stack([(touch & (lengths[None, :] == n)).sum(axis=1) for n in range(1, n_max + 1)], axis=1)
        for n in range(1, n_max + 1):
            ratio = counts[:, n - 1] / lengths[sl]
            i = int(np.argmax(ratio))
            if n not in worst or ratio[i] > worst[n][0]:
                worst[n] = (float(ratio[i]), int(counts[i, n - 1]), int(lengths[sl][i]))
    return [
        Margin("entropy", f"n={n} |G|={g}", float(cnt), g * math.exp(c1 * n))
        for n, (_, cnt, g) in sorted(worst.items())
    ]


# -- clusters -------------------------------------------------------------------------


def check_clusters_step_zero(scenario: Scenario, c2: Optional[float] = None, c1: float = 6 * math.log(4), max_length: int = 8) -> List[Margin]:
    """sup over dual bonds x of sum over 0-clusters C containing x of |phi_0(C)| exp[(2 beta/l0 - c2)|C|] <= 1.

    The clusters are those of the shortest balanced contours (at most `max_polymers` of them,
    up to `max_length`), so the supremum runs over a sub-family of the 0-clusters.
    """
    v, eta, params, l0 = scenario.volume, scenario.eta, scenario.params, scenario.schedule.l0
    c2 = c1 + 1.0 if c2 is None else c2
    pool = []
    if scenario.census is not None:
        census = scenario.census
        ok = (census.minus_sums(eta) >= -(1 - 1 / l0) * census.lengths) & (census.lengths <= max_length)
        for i in np.nonzero(ok)[0][np.argsort(census.lengths[ok], kind="stable")]:
            pool.append(census.contour(int(i)))
            if len(pool) == scenario.max_polymers:
                break
    if len(pool) < scenario.max_polymers:
        for g in sorted(enumerate_closed_curves(v, max_length), key=len)[: scenario.max_polymers - len(pool)]:
            pool.append(Contour([g]))
    if not pool:
        return [Margin("clusters_step_zero", "no balanced polymers", 0.0, 1.0)]
    _, table = phi0_table(pool, eta, params, max_size=scenario.cluster_size)
    lengths = np.array([len(c) for c in pool])
    per_bond = np.zeros(v.n_bonds)
    rate = 2.0 * params.beta / l0 - c2
    for m, phi in table.items():
        members = bits_of(m)
        size = lengths[members].sum()
        hit = np.logical_or.reduce([pool[i].mask for i in members])
        per_bond[hit] += abs(phi) * math.exp(rate * size)
    x = int(np.argmax(per_bond))
    return [Margin("clusters_step_zero", f"bond {x}, {len(pool)} polymers", float(per_bond[x]), 1.0)]


def check_aggregate_bounds(scenario: Scenario, c7: float = 1.0, c7_corner: float = 4.0) -> List[Margin]:
    """log Zhat <= c7 |dK| for n-aggregates, <= c7' l_inf^2 for corner aggregates."""
    report = scenario.report
    l_inf = scenario.schedule.l_inf
    out = [Margin("aggregate_bounds.normal", t.label, t.log_Zhat, c7 * t.boundary_len) for t in report.normal_terms]
    out += [Margin("aggregate_bounds.corner", t.label, t.log_Zhat, c7_corner * l_inf ** 2) for t in report.corner_terms]
    return out


def check_mayer_totals(scenario: Scenario, c6: float = 1.0) -> List[Margin]:
    """|psi_n| <= 2^-n sum over n-aggregates of |dom K|, and |psi_corner| <= exp(-c6 l_inf)."""
    report = scenario.report
    out = []
    for stage in report.stages:
        if stage.order == "corner":
            out.append(Margin("mayer_totals.corner", "corner", abs(stage.psi), math.exp(-c6 * scenario.schedule.l_inf)))
        else:
            dom = sum(len(a.domain) for a in stage.aggregates)
            out.append(Margin("mayer_totals.level", f"level {stage.order}", abs(stage.psi), 2.0 ** -stage.order * dom))
    return out


def check_mayer_weights(measures, clusters: Sequence[MayerCluster]) -> List[Margin]:
    """|w(C)| <= prod(exp|phi| - 1), and w factorizes over the n-compatible components of C."""
    w = mayer_weight(measures, clusters)
    out = [Margin("mayer.bound", f"{len(clusters)} clusters", abs(w), mayer_bound(clusters))]
    comps = n_components(clusters)
    if len(comps) > 1:
        product = float(np.prod([mayer_weight(measures, [clusters[i] for i in comp]) for comp in comps]))
        out.append(Margin("mayer.factorization", f"{len(comps)} components", abs(w - product), 1e-12 * max(1.0, abs(w))))
    return out


# -- probabilities over the boundary condition ----------------------------------------


def _connected_B(agg_boundary: BoundarySet):
    return tuple(agg_boundary.hull.bonds) if len(agg_boundary) else ()


def check_prob_bound(scenario: Scenario, c5: float = 0.05, B: Optional[Sequence[int]] = None) -> List[Margin]:
    """Empirical P{some aggregate has connected boundary hull B} against exp(-c5 |B|).

    Boundary conditions are drawn from the scenario's ensemble; without a given B every hull
    that occurs gets a margin.
    """
    if scenario.ensemble is None:
        raise DomainError("the probability check needs a boundary-condition ensemble")
    v = scenario.volume
    seen = {}
    for r in range(scenario.samples):
        eta = as_eta(scenario.ensemble.sample(v.N, r), v)
        contours = unbalanced_contours(v, eta, scenario.schedule, census=scenario.census)
        hulls = {_connected_B(a.boundary) for a in decompose_aggregates(contours, scenario.schedule, v).aggregates}
        for h in hulls:
            seen[h] = seen.get(h, 0) + 1
    targets = [tuple(sorted(int(b) for b in B))] if B is not None else sorted(seen, key=lambda h: (len(h), h))
    S = scenario.samples
    return [Margin("prob_bound", f"B={list(h)}", seen.get(h, 0) / S, math.exp(-c5 * len(h))) for h in targets]


def check_large_probability(scenario: Scenario, c4: float = 0.1) -> List[Margin]:
    """Empirical P{some large boundary contour is unbalanced} against exp(-c4 N)."""
    if scenario.ensemble is None or scenario.census is None:
        raise DomainError("the large-contour probability check needs an ensemble and the census")
    v, census = scenario.volume, scenario.census
    slope = 1.0 - 1.0 / scenario.schedule.l0
    hits = 0
    for r in range(scenario.samples):
        eta = as_eta(scenario.ensemble.sample(v.N, r), v)
        bad = (census.minus_sums(eta) < -slope * census.lengths) & census.interface
        hits += bool(bad.any())
    return [Margin("large_probability", f"N={v.N}", hits / scenario.samples, math.exp(-c4 * v.N))]


# constants each check reads from the validate config
CONSTANTS = {
    "entropy": ("c1",),
    "clusters_step_zero": ("c1", "c2"),
    "aggregate_bounds": ("c7", "c7_corner"),
    "mayer_totals": ("c6",),
    "prob_bound": ("c5",),
    "large_probability": ("c4",),
}

NEEDS_CENSUS = {"entropy", "aggregate_bounds", "mayer_totals", "large_probability"}


def validate_inequalities(scenario: Scenario, checks: Optional[Sequence[str]] = None, constants=None):
    """Runs the named checks (all registered ones by default) and returns ({check: margins}, skipped).

    Checks that need the census are skipped when the scenario has none.
    """
    checks = list(registry.validator) if checks is None else list(checks)
    constants = {} if constants is None else constants
    margins, skipped = {}, []
    for name in checks:
        if name not in registry.validator:
            raise DomainError(f"unknown check {name!r}")
        if name in NEEDS_CENSUS and scenario.census is None:
            skipped.append(name)
            continue
        kwargs = {c: constants[c] for c in CONSTANTS.get(name, ()) if c in constants}
        margins[name] = instantiate(registry.validator, name, scenario, **kwargs)
        failed = [m for m in margins[name] if not m.holds]
        if failed:
            log.warning(f"{name}: {len(failed)} of {len(margins[name])} inequalities violated, worst margin {min(m.margin for m in failed):.3g}")
    if skipped:
        log.warning(f"skipped checks that need the census at N={scenario.volume.N}: {skipped}")
    return margins, skipped
