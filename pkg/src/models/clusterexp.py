""" Abstract cluster / polymer models on a finite incompatibility graph.

Subsets of polymers are int bitmasks. A weight g is given either per polymer (polymer
model: g(D) = prod z over pairwise compatible D, 0 otherwise) or per cluster (cluster model:
g(D) = product of the cluster weights of the connected components of D).

Over a base set A with |A| <= 20 every table is computed on all 2^|A| subsets at once:
g by adding the highest bit, Z as the subset-sum (zeta) transform of g, and the truncated
weights g^T as the Moebius transform of log Z.
"""
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from src.utils.errors import CapExceededError, ConfigError, DomainError
from src.utils.experiment import get_logger

log = get_logger(__name__)

MAX_SUBSET_BASE = 20
MAX_CLUSTER_SIZE = 12


def bits_of(mask: int) -> List[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def mask_of(items) -> int:
    m = 0
    for i in items:
        m |= 1 << int(i)
    return m


class PolymerSystem:
    """
    incompatible   : (n, n) bool, symmetric; the diagonal is set (X is incompatible with X)
    z              : (n,) polymer activities, or per-polymer bounds |g(D)| <= prod z for cluster models
    cluster_weight : callable(mask) -> complex for connected masks; None means a polymer model
    """

    def __init__(self, incompatible, z=None, cluster_weight: Optional[Callable[[int], complex]] = None, names=None):
        inc = np.array(incompatible, dtype=bool)
        if inc.ndim != 2 or inc.shape[0] != inc.shape[1]:
            raise DomainError(f"incompatibility must be a square matrix, got shape {inc.shape}")
        if not np.array_equal(inc, inc.T):
            raise DomainError("incompatibility must be symmetric")
        np.fill_diagonal(inc, True)
        self.n = len(inc)
        self.incompatible = inc
        self.neighbors = [mask_of(np.nonzero(inc[i])[0]) for i in range(self.n)]  # closed neighbourhoods
        if z is None and cluster_weight is None:
            raise DomainError("a polymer system needs activities z or a cluster weight")
        self.z = None if z is None else np.asarray(z)
        if self.z is not None and self.z.shape != (self.n,):
            raise DomainError(f"need {self.n} activities, got shape {self.z.shape}")
        self.cluster_weight = cluster_weight
        self.names = list(names) if names is not None else list(range(self.n))

    @property
    def is_polymer_model(self):
        return self.cluster_weight is None

    @property
    def full(self):
        return (1 << self.n) - 1

    def __len__(self):
        return self.n

    def __repr__(self):
        kind = "polymer" if self.is_polymer_model else "cluster"
        return f"PolymerSystem({kind}, n={self.n})"

    # -- graph -----------------------------------------------------------------

    def touching(self, mask: int) -> int:
        """ Polymers incompatible with some member of mask """
        out = 0
        for i in bits_of(mask):
            out |= self.neighbors[i]
        return out

    def component(self, mask: int, start: int) -> int:
        comp, frontier = 1 << start, 1 << start
        while frontier:
            frontier = self.touching(frontier) & mask & ~comp
            comp |= frontier
        return comp

    def components(self, mask: int) -> List[int]:
        out = []
        while mask:
            c = self.component(mask, (mask & -mask).bit_length() - 1)
            out.append(c)
            mask &= ~c
        return out

    def is_cluster(self, mask: int) -> bool:
        return mask != 0 and len(self.components(mask)) == 1

    def is_independent(self, mask: int) -> bool:
        return all(not (self.neighbors[i] & mask & ~(1 << i)) for i in bits_of(mask))

    def incompatible_with(self, d1: int, d2: int) -> bool:
        return bool(self.touching(d1) & d2)

    # -- weights ---------------------------------------------------------------

    def g(self, mask: int):
        if mask == 0:
            return 1.0
        if self.is_polymer_model:
            if not self.is_independent(mask):
                return 0.0
            return np.prod([self.z[i] for i in bits_of(mask)])
        return np.prod([self.cluster_weight(c) for c in self.components(mask)])

    def check_factorization(self, rng, samples=200) -> float:
        """Largest |g(D1 u D2) - g(D1) g(D2)| over sampled compatible disjoint pairs."""
        worst = 0.0
        for _ in range(samples):
            labels = rng.integers(0, 3, size=self.n)
            d1, d2 = mask_of(np.nonzero(labels == 1)[0]), mask_of(np.nonzero(labels == 2)[0])
            if self.incompatible_with(d1, d2):
                continue
            worst = max(worst, abs(self.g(d1 | d2) - self.g(d1) * self.g(d2)))
        return float(worst)

    # -- serialization ---------------------------------------------------------

    @classmethod
    def from_json(cls, payload):
        """{"polymers": n or [names], "incompatible": [[i, j], ...], "z": [...], "cluster_weights": {"i,j,..": w}}

        Complex numbers are written as [re, im].
        """

        def number(x):
            return complex(x[0], x[1]) if isinstance(x, (list, tuple)) else x

        try:
            polymers = payload["polymers"]
            names = polymers if isinstance(polymers, list) else None
            n = len(polymers) if names is not None else int(polymers)
            inc = np.zeros((n, n), dtype=bool)
            for i, j in payload.get("incompatible", []):
                inc[i, j] = inc[j, i] = True
            z = [number(x) for x in payload["z"]] if "z" in payload else None
            weight = None
            if "cluster_weights" in payload:
                table = {mask_of(int(t) for t in k.split(",")): number(w) for k, w in payload["cluster_weights"].items()}
                weight = lambda m: table.get(m, 0.0)  # noqa: E731
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed polymer system description: {e}") from e
        return cls(inc, z=z, cluster_weight=weight, names=names)


def load_system(path) -> PolymerSystem:
    try:
        with open(path) as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read polymer system from {path}: {e}") from e
    return PolymerSystem.from_json(payload)


# -- subset tables ---------------------------------------------------------------


@dataclass
class SubsetTables:
    """All quantities on the 2^k subsets of a base set A (local bit i = polymer base[i])."""

    base: List[int]
    g: np.ndarray
    Z: np.ndarray
    log_Z: np.ndarray
    g_T: np.ndarray

    def to_local(self, mask: int) -> int:
        pos = {p: i for i, p in enumerate(self.base)}
        return mask_of(pos[p] for p in bits_of(mask))


def _zeta(f, k):
    f = f.copy()
    idx = np.arange(len(f))
    for i in range(k):
        hi = (idx >> i) & 1 == 1
        f[hi] += f[idx[hi] ^ (1 << i)]
    return f


def _moebius(f, k):
    f = f.copy()
    idx = np.arange(len(f))
    for i in range(k):
        hi = (idx >> i) & 1 == 1
        f[hi] -= f[idx[hi] ^ (1 << i)]
    return f


def subset_tables(sys: PolymerSystem, A: Optional[int] = None) -> SubsetTables:
    A = sys.full if A is None else A
    base = bits_of(A)
    k = len(base)
    if k > MAX_SUBSET_BASE:
        raise CapExceededError(f"subset tables over {k} polymers exceed the cap of {MAX_SUBSET_BASE}")
    complex_weights = (sys.z is not None and np.iscomplexobj(sys.z)) or not sys.is_polymer_model
    dtype = np.complex128 if complex_weights else np.float64
    g = np.zeros(1 << k, dtype=dtype)
    g[0] = 1.0
    if sys.is_polymer_model:
        local_nb = [0] * k
        for i, p in enumerate(base):
            for j, q in enumerate(base):
                if sys.incompatible[p, q]:
                    local_nb[i] |= 1 << j
        independent = np.zeros(1 << k, dtype=bool)
        independent[0] = True
        idx = np.arange(1 << k)
        for h in range(k):
            rest = idx[1 << h: 1 << (h + 1)] - (1 << h)
            ok = independent[rest] & ((rest & local_nb[h] & ~(1 << h)) == 0)
            independent[1 << h: 1 << (h + 1)] = ok
            g[1 << h: 1 << (h + 1)] = np.where(ok, g[rest] * sys.z[base[h]], 0.0)
    else:
        for m in range(1, 1 << k):
            g[m] = sys.g(mask_of(base[i] for i in bits_of(m)))
    Z = _zeta(g, k)
    if np.any(Z == 0):
        raise DomainError("a partition function vanishes; log Z is undefined")
    if complex_weights:
        log_Z = np.log(Z.astype(np.complex128))
    else:
        if np.any(Z < 0):
            log_Z = np.log(Z.astype(np.complex128))
        else:
            log_Z = np.log(Z)
    return SubsetTables(base=base, g=g, Z=Z, log_Z=log_Z, g_T=_moebius(log_Z, k))


# -- partition functions -----------------------------------------------------------


def partition_function(sys: PolymerSystem, A: Optional[int] = None):
    """ Z(A) = sum over D subset of A of g(D); Z(empty) = 1 """
    A = sys.full if A is None else A
    if A == 0:
        return 1.0
    if sys.is_polymer_model:
        memo = {}

        def rec(mask):
            if mask == 0:
                return 1.0
            if mask not in memo:
                low = mask & -mask
                x = low.bit_length() - 1
                memo[mask] = rec(mask ^ low) + sys.z[x] * rec(mask & ~sys.neighbors[x])
            return memo[mask]

        return rec(A)
    k = bin(A).count("1")
    if k > MAX_SUBSET_BASE:
        raise CapExceededError(f"partition function over {k} polymers of a cluster model exceeds the cap of {MAX_SUBSET_BASE}")
    return subset_tables(sys, A).Z[-1]


class ClusterWeightTable:
    """ {cluster mask: g^T} up to a maximal cluster size """

    def __init__(self, values: Dict[int, complex], max_size: int, base: int):
        self.values = values
        self.max_size = max_size
        self.base = base

    def __getitem__(self, mask):
        return self.values.get(mask, 0.0)

    def __len__(self):
        return len(self.values)

    def items(self):
        return self.values.items()

    def log_partition(self, A: int):
        return sum(v for m, v in self.values.items() if m & ~A == 0)


def _clusters_up_to(sys: PolymerSystem, A: int, max_size: int) -> List[int]:
    found, frontier = set(), {1 << i for i in bits_of(A)}
    size = 1
    while frontier and size <= max_size:
        found |= frontier
        if size == max_size:
            break
        nxt = set()
        for m in frontier:
            for j in bits_of(sys.touching(m) & A & ~m):
                nxt.add(m | (1 << j))
        frontier = nxt
        size += 1
    return sorted(found)


def truncated_weights(sys: PolymerSystem, max_size: int, A: Optional[int] = None) -> ClusterWeightTable:
    """g^T on every cluster D subset of A with |D| <= max_size."""
    if max_size > MAX_CLUSTER_SIZE:
        raise CapExceededError(f"cluster size {max_size} exceeds the cap of {MAX_CLUSTER_SIZE}")
    A = sys.full if A is None else A
    values = {}
    if bin(A).count("1") <= MAX_SUBSET_BASE:
        tables = subset_tables(sys, A)
        for m in _clusters_up_to(sys, A, max_size):
            values[m] = tables.g_T[tables.to_local(m)]
    else:
        for m in _clusters_up_to(sys, A, max_size):
            t = subset_tables(sys, m)
            values[m] = t.g_T[-1]
    return ClusterWeightTable(values, max_size, A)


def log_partition_via_clusters(sys: PolymerSystem, A: Optional[int] = None, max_size: Optional[int] = None):
    """(sum of g^T over clusters in A up to max_size, exact) where exact means no cluster was cut off."""
    A = sys.full if A is None else A
    if A == 0:
        return 0.0, True
    largest = max(bin(c).count("1") for c in sys.components(A))
    max_size = min(largest, MAX_CLUSTER_SIZE) if max_size is None else max_size
    table = truncated_weights(sys, max_size, A)
    exact = max_size >= largest
    if not exact:
        log.debug(f"cluster sum truncated at size {max_size}, largest connected component has {largest} polymers")
    return table.log_partition(A), exact


# -- convergence criterion -----------------------------------------------------------


def _ratio(num, den):
    # convention 0/0 = 0
    if num == 0:
        return 0.0
    return math.inf if den == 0 else num / den


@dataclass
class KPVerdict:
    model: str
    premise_ratio: float  # sup over X of the premise sum divided by a(X)
    premise_holds: bool
    weight_bound_holds: bool
    conclusion_lhs: np.ndarray = field(repr=False)  # per polymer
    conclusion_margins: np.ndarray = field(repr=False)  # a(X) - lhs(X)
    conclusion_exact: bool = True

    @property
    def guaranteed(self):
        return self.premise_holds and self.weight_bound_holds

    @property
    def observed(self):
        return bool(np.all(self.conclusion_margins >= -1e-12))

    @property
    def status(self):
        if self.guaranteed:
            return "guaranteed"
        return "observed" if self.observed else "premise violated"

    @property
    def premise_margin(self):
        return 1.0 - self.premise_ratio

    @property
    def worst_conclusion_margin(self):
        return float(self.conclusion_margins.min()) if len(self.conclusion_margins) else math.inf

    def to_json(self):
        return {
            "model": self.model,
            "status": self.status,
            "premise_ratio": self.premise_ratio,
            "premise_margin": self.premise_margin,
            "weight_bound_holds": self.weight_bound_holds,
            "worst_conclusion_margin": self.worst_conclusion_margin,
            "conclusion_exact": self.conclusion_exact,
        }


def kp_check(sys: PolymerSystem, a, b, max_size: Optional[int] = None) -> KPVerdict:
    """Checks the convergence premise for (a, b) and evaluates the cluster bound it implies.

    polymer model : sup_X 1/a(X) sum_{Y incompatible with X} e^{(a+b)(Y)} |z(Y)| <= 1
    cluster model : sup_X 1/a(X) sum_{Y incompatible with X} e^{(2a+b)(Y)} z(Y) <= 1, and |g(D)| <= prod z
    conclusion    : sum over clusters D incompatible with X of e^{sum_D b} |g^T(D)| <= a(X)
    """
    a, b = np.broadcast_to(np.asarray(a, dtype=np.float64), (sys.n,)), np.broadcast_to(np.asarray(b, dtype=np.float64), (sys.n,))
    if sys.z is None:
        raise DomainError("the convergence criterion needs per-polymer activities or bounds z")
    z = np.abs(sys.z)
    coef = np.exp(a + b) if sys.is_polymer_model else np.exp(2 * a + b)
    ratio = max(_ratio(float((sys.incompatible[x] * coef * z).sum()), a[x]) for x in range(sys.n)) if sys.n else 0.0

    largest = max((bin(c).count("1") for c in sys.components(sys.full)), default=0)
    size = min(largest, MAX_CLUSTER_SIZE) if max_size is None else max_size
    table = truncated_weights(sys, max(size, 1))
    weight_ok = True
    if not sys.is_polymer_model:
        weight_ok = all(abs(sys.g(m)) <= np.prod(z[bits_of(m)]) * (1 + 1e-12) for m in table.values)

    lhs = np.zeros(sys.n)
    for m, gt in table.items():
        term = np.exp(b[bits_of(m)].sum()) * abs(gt)
        hit = sys.touching(m)
        for x in range(sys.n):
            if hit >> x & 1:
                lhs[x] += term
    verdict = KPVerdict(
        model="polymer" if sys.is_polymer_model else "cluster",
        premise_ratio=float(ratio),
        premise_holds=ratio <= 1.0,
        weight_bound_holds=weight_ok,
        conclusion_lhs=lhs,
        conclusion_margins=a - lhs,
        conclusion_exact=size >= largest,
    )
    log.debug(f"kp_check: {verdict.status}, premise ratio {ratio:.4g}")
    return verdict


def as_polymer_model(sys: PolymerSystem, max_size: Optional[int] = None) -> PolymerSystem:
    """The same model read as a polymer model whose polymers are the clusters of `sys`.

    Two clusters are incompatible when some member of one is incompatible with some member
    of the other; the activity of a cluster is its weight g.
    """
    largest = max((bin(c).count("1") for c in sys.components(sys.full)), default=0)
    size = largest if max_size is None else max_size
    clusters = [m for m in _clusters_up_to(sys, sys.full, size)]
    k = len(clusters)
    inc = np.zeros((k, k), dtype=bool)
    for i in range(k):
        reach = sys.touching(clusters[i])
        for j in range(i, k):
            inc[i, j] = inc[j, i] = bool(reach & clusters[j])
    z = np.array([sys.g(m) for m in clusters])
    return PolymerSystem(inc, z=z, names=clusters)
