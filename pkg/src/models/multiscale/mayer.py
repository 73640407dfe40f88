""" Mayer weights over the product measure of a stage's aggregates.

Two kinds of clusters enter a stage:

    0-clusters   w(C_1..C_k) = E[ prod_j (exp(-phi_j 1{C_j incompatible with d}) - 1) ]
    interactions w(S_1..S_k) = E[ prod_j (exp(u_j(d_{S_j})) - 1) ]

with d drawn from prod_a rho-hat(d_a) / Zhat_a. A 0-cluster is described by its weight and,
per aggregate, the bitmask of aggregate contours it is incompatible with. An interaction is
the part of log I(d) that needs every aggregate of S at once (a Moebius transform over the
aggregates). Both weights factorize over groups of clusters that share no aggregate, so a
family of them is a cluster model over the aggregates' incompatibility graph.
"""
import itertools
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
from opt_einsum import contract, get_symbol

from src.models.clusterexp import PolymerSystem, as_polymer_model, bits_of, log_partition_via_clusters
from src.utils.errors import CapExceededError
from src.utils.experiment import get_logger

if TYPE_CHECKING:
    from src.models.multiscale.expansion import AggregateMeasure

log = get_logger(__name__)

MAX_JOINT_STATES = 1 << 20
MAX_INTERACTIONS = 8


@dataclass(frozen=True)
class MayerCluster:
    phi: float
    touches: Dict[int, int] = field(default_factory=dict)  # aggregate index -> contour bitmask

    @property
    def aggregates(self):
        return {a for a, m in self.touches.items() if m}

    def hit(self, families: Dict[int, int]) -> bool:
        return any(families.get(a, 0) & m for a, m in self.touches.items())


def n_incompatible(c1, c2) -> bool:
    """Both clusters are incompatible with a common aggregate."""
    return bool(set(c1.aggregates) & set(c2.aggregates))


def n_components(clusters: Sequence) -> List[List[int]]:
    """Maximal groups of the family connected under n-incompatibility (indices into `clusters`)."""
    left = list(range(len(clusters)))
    out = []
    while left:
        comp, frontier = [left[0]], [left[0]]
        left = left[1:]
        while frontier:
            nxt = [j for j in left if any(n_incompatible(clusters[i], clusters[j]) for i in frontier)]
            left = [j for j in left if j not in nxt]
            comp += nxt
            frontier = nxt
        out.append(sorted(comp))
    return out


def mayer_weight(measures: Sequence["AggregateMeasure"], clusters: Sequence[MayerCluster]) -> float:
    if not clusters:
        return 1.0
    involved = sorted(set().union(*(c.aggregates for c in clusters)))
    if not involved:
        # a cluster touching no aggregate contributes exp(0) - 1
        return 0.0
    sizes = [len(measures[a].families) for a in involved]
    if math.prod(sizes) > MAX_JOINT_STATES:
        raise CapExceededError(f"Mayer weight over {math.prod(sizes)} joint aggregate states")
    probs = [measures[a].probabilities for a in involved]
    total = 0.0
    for pick in itertools.product(*(range(s) for s in sizes)):
        p = float(np.prod([probs[k][i] for k, i in enumerate(pick)]))
        if p == 0.0:
            continue
        families = {a: measures[a].families[i] for a, i in zip(involved, pick)}
        term = 1.0
        for c in clusters:
            term *= math.exp(-c.phi) - 1.0 if c.hit(families) else 0.0
            if term == 0.0:
                break
        total += p * term
    return total


def mayer_bound(clusters: Sequence[MayerCluster]) -> float:
    """ prod (exp|phi| - 1), the bound on |w| """
    return float(np.prod([math.expm1(abs(c.phi)) for c in clusters])) if clusters else 1.0


# -- interactions between the aggregates of a stage --------------------------------------


@dataclass(frozen=True)
class Interaction:
    aggregates: Tuple[int, ...]
    u: np.ndarray = field(compare=False, repr=False)  # over the joint family indices of `aggregates`


def interactions(log_G: np.ndarray, ref: Optional[Sequence[int]] = None, tol=1e-12) -> List[Interaction]:
    """Moebius transform of log G over the aggregate axes around the joint family `ref`.

    log_G is a table over the joint family indices of k aggregates with log_G[ref] = 0 (ref
    defaults to index 0 on every axis). Returns the u_S that are not identically zero, so that
    log G(d) = sum_S u_S(d_S) with u_S vanishing whenever some aggregate of S sits at ref.
    """
    k = log_G.ndim
    ref = (0,) * k if ref is None else tuple(ref)
    out = []
    for r in range(1, k + 1):
        for S in itertools.combinations(range(k), r):
            shape = [log_G.shape[ax] for ax in S]
            u = np.zeros(shape)
            for q in range(r + 1):
                for T in itertools.combinations(S, q):
                    idx = tuple(slice(None) if ax in T else ref[ax] for ax in range(k))
                    u = u + (-1) ** (r - q) * log_G[idx].reshape([log_G.shape[ax] if ax in T else 1 for ax in S])
            if np.abs(u).max() > tol:
                out.append(Interaction(S, u))
    return out


def interaction_weight(measures: Sequence["AggregateMeasure"], family: Sequence[Interaction]) -> float:
    """E[prod_S (exp(u_S) - 1)] under the product of the aggregate measures."""
    if not family:
        return 1.0
    involved = sorted(set().union(*(s.aggregates for s in family)))
    symbol = {a: get_symbol(i) for i, a in enumerate(involved)}
    operands, subscripts = [], []
    for s in family:
        operands.append(np.expm1(s.u))
        subscripts.append("".join(symbol[a] for a in s.aggregates))
    for a in involved:
        operands.append(measures[a].probabilities)
        subscripts.append(symbol[a])
    return float(contract(",".join(subscripts) + "->", *operands))


@dataclass
class StageClusters:
    """The cluster model of one stage and the polymer level it defines."""

    interactions: List[Interaction]
    system: PolymerSystem = field(repr=False)
    level: PolymerSystem = field(repr=False)  # polymers are the connected families of interactions
    psi: float

    def to_json(self):
        return {"interactions": [list(s.aggregates) for s in self.interactions], "level_polymers": self.level.n, "psi": self.psi}


def stage_clusters(measures: Sequence["AggregateMeasure"], log_G: np.ndarray, ref=None, max_interactions=MAX_INTERACTIONS) -> StageClusters:
    """psi = log E[G(d)] as the sum of the truncated weights of the stage's cluster model.

    Polymers are the interactions, incompatible when they share an aggregate, and a connected
    family weighs its Mayer weight.
    """
    found = interactions(log_G, ref)
    if len(found) > max_interactions:
        raise CapExceededError(f"{len(found)} aggregate interactions exceed the cap of {max_interactions}")
    n = len(found)
    inc = np.array([[bool(set(a.aggregates) & set(b.aggregates)) for b in found] for a in found], dtype=bool).reshape(n, n)
    memo: Dict[int, float] = {}

    def weight(mask):
        if mask not in memo:
            memo[mask] = interaction_weight(measures, [found[i] for i in bits_of(mask)])
        return memo[mask]

    system = PolymerSystem(inc, cluster_weight=weight)
    total, _ = log_partition_via_clusters(system)
    psi = float(np.real(total)) if n else 0.0
    log.debug(f"stage cluster model: {n} interactions over {log_G.ndim} aggregates, psi = {psi:.6g}")
    return StageClusters(found, system, as_polymer_model(system), psi)
