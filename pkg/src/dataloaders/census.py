""" Exhaustive census of Lambda(N) for N <= 2, cached as npz.

One pass over the 2^(n-1) configurations with site 0 = +1 records
    sign       : exterior sign of every half configuration (packed bits)
    plus_hist  : counts over Omega^+ of (perimeter spin pattern, number of broken bonds)
    universe   : every boundary contour that occurs, with its packed bond set, boundary,
                 minus boundary and interface flag
    rows       : the distinct (boundary contours of D(sigma), #broken bonds) over Omega^+, with counts

Bulk contours only enter through the number of broken bonds: their weight is exp(-2 beta |Gamma|).
"""
import functools
from pathlib import Path

import numpy as np
from scipy.special import logsumexp
from tqdm.auto import tqdm

from src.models.functional.enumerate import (
    boundary_field,
    broken_mask,
    config_chunks,
    n_chunks,
    pack_bits,
    popcount,
    unpack_bits,
    unpack_spins,
)
from src.models.functional.regions import curve_sides, realize, trace_open_curves
from src.models.lattice import Volume, build_volume
from src.utils.errors import CapExceededError
from src.utils.experiment import default_cache_path, get_logger

log = get_logger(__name__)

CENSUS_MAX_N = 2
CHUNK = 1 << 16
MERGE_EVERY = 32


def perimeter_sites(volume: Volume):
    return np.unique(volume.boundary_inner)


def _merge_rows(blocks):
    rows = np.concatenate([r for r, _ in blocks])
    counts = np.concatenate([c for _, c in blocks])
    rows, inverse = np.unique(rows, axis=0, return_inverse=True)
    return rows, np.bincount(inverse.ravel(), weights=counts).astype(np.int64)


class _Universe:
    """Growing table of boundary contours keyed by their packed bond set."""

    def __init__(self, volume):
        self.volume = volume
        self.index = {}
        self.keys, self.boundary, self.minus, self.interface = [], [], [], []

    def ids(self, keys, bnd, flips, iface):
        uniq, first = np.unique(keys, return_index=True)
        new = [i for i, k in zip(first, uniq) if int(k) not in self.index]
        if new:
            new = np.array(new)
            masks = unpack_bits(keys[new], self.volume.n_bonds)
            spins, ok = realize(masks, self.volume)
            assert ok.all()
            spins = spins * (1 - 2 * (flips[new] & 1))[:, None]
            inner = spins[:, self.volume.boundary_inner] < 0  # (k, M)
            minus = pack_bits(inner) & bnd[new]
            for j, i in enumerate(new):
                self.index[int(keys[i])] = len(self.keys)
                self.keys.append(keys[i])
                self.boundary.append(bnd[i])
                self.minus.append(minus[j])
                self.interface.append(bool(iface[i]))
        return np.array([self.index[int(k)] for k in keys], dtype=np.int64)


def _curve_slots(K, cfg, B, R):
    """ Dense (B, R) table of curve indices per configuration, -1 where empty """
    rank = np.arange(K) - np.searchsorted(cfg, cfg, side="left")
    slots = -np.ones((B, R), dtype=np.int64)
    slots[cfg, rank] = np.arange(K)
    return slots


def build_census(N: int, chunk=CHUNK, progress=False) -> "Census":
    if N > CENSUS_MAX_N:
        raise CapExceededError(f"census is limited to N <= {CENSUS_MAX_N}, requested N={N}")
    v = build_volume(N)
    n, nb, M = v.n_sites, v.n_bonds, v.n_boundary
    R = (M - 4) // 2  # open curves per configuration
    per = perimeter_sites(v)
    plus_hist = np.zeros((1 << len(per)) * (nb + 1), dtype=np.int64)
    signs, blocks, pending = [], [], []
    universe = _Universe(v)

    chunks = config_chunks(n, chunk=chunk, half=True)
    for _, spins in tqdm(chunks, total=n_chunks(n, chunk, half=True), disable=not progress, desc=f"census N={N}"):
        B = len(spins)
        bonds = broken_mask(spins, v)
        m = bonds.sum(axis=1)
        cfg, masks, _ = trace_open_curves(bonds, v)
        K = len(cfg)
        flips = np.zeros(B, dtype=np.int64)
        ids = -np.ones((B, R), dtype=np.int64)
        if K:
            _, site0_in, corners, bnd = curve_sides(masks, v)
            flips = np.bincount(cfg, weights=site0_in, minlength=B).astype(np.int64)
            packed, bbits = pack_bits(masks), pack_bits(bnd)
            slots = _curve_slots(K, cfg, B, R)
            valid = slots >= 0
            safe = np.where(valid, slots, 0)
            sb = np.where(valid, bbits[safe], np.uint64(0))  # (B, R)
            overlap = (sb[:, :, None] & sb[:, None, :]) != 0  # (B, R, R)
            label = np.where(valid, np.arange(R)[None, :], R)
            for _ in range(R):
                label = np.minimum(label, np.where(overlap, label[:, None, :], R).min(axis=2))
            key = np.zeros((B, R), dtype=np.uint64)
            cb = np.zeros((B, R), dtype=np.uint64)
            cf = np.zeros((B, R), dtype=np.int64)
            ci = np.zeros((B, R), dtype=bool)
            for i in range(R):
                rows = np.nonzero(valid[:, i])[0]
                lab, c = label[rows, i], slots[rows, i]
                key[rows, lab] |= packed[c]
                cb[rows, lab] |= bbits[c]
                cf[rows, lab] += site0_in[c]
                ci[rows, lab] |= corners[c] == 2
            present = key != 0
            ids[present] = universe.ids(key[present], cb[present], cf[present], ci[present])
        s = spins[:, 0] * (1 - 2 * (flips & 1))
        signs.append(s < 0)

        plus = spins[:, per] * s[:, None]
        q = pack_bits(plus < 0).astype(np.int64)
        plus_hist += np.bincount(q * (nb + 1) + m, minlength=len(plus_hist))

        fam = np.sort(np.where(ids >= 0, ids, np.iinfo(np.int64).max), axis=1)
        fam = np.where(fam == np.iinfo(np.int64).max, -1, fam)
        rows = np.concatenate([fam, m[:, None]], axis=1).astype(np.int32)
        rows, counts = np.unique(rows, axis=0, return_counts=True)
        pending.append((rows, counts))
        if len(pending) >= MERGE_EVERY:
            blocks.append(_merge_rows(pending))
            pending = []
    if pending:
        blocks.append(_merge_rows(pending))
    rows, counts = _merge_rows(blocks)

    # renumber the universe by packed key so ids do not depend on the chunking
    keys = np.array(universe.keys, dtype=np.uint64)
    order = np.argsort(keys, kind="stable")
    remap = np.empty(len(order) + 1, dtype=np.int64)
    remap[order] = np.arange(len(order))
    remap[-1] = -1
    fam = remap[rows[:, :-1]]
    fam = np.sort(np.where(fam >= 0, fam, np.iinfo(np.int64).max), axis=1)
    fam = np.where(fam == np.iinfo(np.int64).max, -1, fam)
    rows = np.concatenate([fam, rows[:, -1:]], axis=1).astype(np.int32)
    rows, inverse = np.unique(rows, axis=0, return_inverse=True)
    counts = np.bincount(inverse.ravel(), weights=counts).astype(np.int64)

    census = Census(
        N=N,
        sign=np.packbits(np.concatenate(signs), bitorder="little"),
        plus_hist=plus_hist.reshape(1 << len(per), nb + 1),
        keys=keys[order],
        boundary=np.array(universe.boundary, dtype=np.uint64)[order],
        minus=np.array(universe.minus, dtype=np.uint64)[order],
        interface=np.array(universe.interface, dtype=bool)[order],
        rows=rows,
        counts=counts,
    )
    log.info(f"census N={N}: {len(keys)} boundary contours, {len(rows)} family rows")
    return census


class Census:
    def __init__(self, N, sign, plus_hist, keys, boundary, minus, interface, rows, counts):
        self.N = int(N)
        self.volume = build_volume(self.N)
        self.sign = sign
        self.plus_hist = plus_hist
        self.keys = keys
        self.boundary = boundary
        self.minus = minus
        self.interface = interface
        self.rows = rows
        self.counts = counts

    # -- persistence -----------------------------------------------------------

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(
            path, N=self.N, sign=self.sign, plus_hist=self.plus_hist, keys=self.keys, boundary=self.boundary,
            minus=self.minus, interface=self.interface, rows=self.rows, counts=self.counts,
        )
        return path

    @classmethod
    def load(cls, path):
        with np.load(path) as f:
            return cls(**{k: f[k] for k in f.files})

    # -- configurations ----------------------------------------------------------

    def signed_chunks(self, chunk=CHUNK):
        """Yields (spins, exterior sign) over all 2^n configurations."""
        n = self.volume.n_sites
        bits = np.unpackbits(self.sign, bitorder="little")
        for start in range(0, 1 << (n - 1), chunk):
            k = np.arange(start, min(start + chunk, 1 << (n - 1)), dtype=np.int64)
            spins = unpack_spins(k << 1, n)
            s = (1 - 2 * bits[k].astype(np.int8)).astype(np.int8)
            yield np.concatenate([spins, -spins]), np.concatenate([s, -s])

    # -- partition functions -----------------------------------------------------

    def _pattern_field(self, eta):
        per = perimeter_sites(self.volume)
        h = boundary_field(eta, self.volume)[per]
        pattern = 1 - 2 * unpack_bits(np.arange(len(self.plus_hist), dtype=np.uint64), len(per)).astype(np.float64)
        return pattern @ h  # (2^P,)

    def constrained_log_partition(self, eta, beta, lam=1.0):
        """ (log Z^+, log Z^-) from the perimeter histogram """
        q, m = np.nonzero(self.plus_hist)
        log_count = np.log(self.plus_hist[q, m].astype(np.float64))
        field = self._pattern_field(np.asarray(eta, dtype=np.float64))[q]
        base = log_count - 2.0 * beta * m
        return float(logsumexp(base + lam * beta * field)), float(logsumexp(base - lam * beta * field))

    def log_partition(self, eta, beta, lam=1.0):
        return float(np.logaddexp(*self.constrained_log_partition(eta, beta, lam)))

    # -- contours --------------------------------------------------------------------

    @property
    def n_contours(self):
        return len(self.keys)

    @functools.cached_property
    def lengths(self):
        return popcount(self.keys).astype(np.int64)

    def minus_sums(self, eta):
        """ sum of eta over the minus boundary of every universe contour : (U,) """
        bits = unpack_bits(self.minus, self.volume.n_boundary).astype(np.float64)
        return bits @ np.asarray(eta, dtype=np.float64)

    def log_rho(self, eta, beta, lam=1.0):
        return -2.0 * beta * (self.lengths + lam * self.minus_sums(eta))

    def contour(self, i):
        from src.models.contour.contour import Contour

        mask = unpack_bits(self.keys[i:i + 1], self.volume.n_bonds)[0]
        return Contour.from_mask(mask, self.volume)

    def find(self, contour) -> int:
        """Universe id of a Contour, -1 when it never occurs."""
        key = pack_bits(contour.mask[None])[0]
        i = int(np.searchsorted(self.keys, key))
        return i if i < len(self.keys) and self.keys[i] == key else -1

    @property
    def families(self):
        """ (R, K) contour ids padded with -1 """
        return self.rows[:, :-1].astype(np.int64)

    @property
    def broken(self):
        return self.rows[:, -1].astype(np.int64)

    def row_log_weights(self, eta, beta, lam=1.0):
        """ log of exp(E(empty)) * weight, per row: -2 beta m - 2 lam beta sum of member minus sums """
        fam = self.families
        ms = np.concatenate([self.minus_sums(eta), [0.0]])
        return -2.0 * beta * self.broken - 2.0 * lam * beta * ms[fam].sum(axis=1)

    def polymer_log_partition(self, eta, beta, lam=1.0):
        """ log Z^+ through the contour representation: -E(empty) + log sum over families of prod rho """
        eta = np.asarray(eta, dtype=np.float64)
        lw = self.row_log_weights(eta, beta, lam)
        return float(lam * beta * eta.sum() + logsumexp(lw, b=self.counts.astype(np.float64)))

    def sub_model_log_partition(self, eta, beta, lam, allowed):
        """ log of the polymer partition function over the boundary contours in `allowed` alone (no bulk) """
        allowed = np.concatenate([np.asarray(allowed, dtype=bool), [True]])
        fam = self.families
        lengths = np.concatenate([self.lengths, [0]])
        ok = allowed[fam].all(axis=1) & (lengths[fam].sum(axis=1) == self.broken)
        log_rho = np.concatenate([self.log_rho(eta, beta, lam), [0.0]])
        return float(logsumexp(log_rho[fam[ok]].sum(axis=1)))

    def restricted_log_partitions(self, eta, beta, lam, selected):
        """ log Z_0(F) for every subset F of the `selected` contour ids that occurs.

        Z_0(F) sums, over the families whose selected part is exactly F, the weights of
        the remaining members. Returns {frozenset(F): log Z_0(F)}.
        """
        selected = np.asarray(selected, dtype=bool)
        fam = self.families
        hit = np.where(fam >= 0, selected[np.where(fam >= 0, fam, 0)], False)
        log_rho = np.concatenate([self.log_rho(eta, beta, lam), [0.0]])
        lw = self.row_log_weights(eta, beta, lam) - np.where(hit, log_rho[fam], 0.0).sum(axis=1)
        lw = lw + np.log(self.counts.astype(np.float64))
        keys = np.sort(np.where(hit, fam, -1), axis=1)
        keys, inverse = np.unique(keys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))
        out = {}
        for g in range(len(keys)):
            seg = lw[order[bounds[g]:bounds[g + 1]]]
            out[frozenset(int(i) for i in keys[g] if i >= 0)] = float(logsumexp(seg))
        return out


def census_path(N, cache_dir=None):
    return Path(cache_dir or default_cache_path()) / f"census_N{N}.npz"


@functools.lru_cache(maxsize=None)
def _load(N, cache_dir, progress):
    path = census_path(N, cache_dir)
    if path.exists():
        log.info(f"loading census from {path}")
        return Census.load(path)
    census = build_census(N, progress=progress)
    try:
        census.save(path)
    except OSError as e:
        log.warning(f"could not cache census at {path}: {e}")
    return census


def load_census(N: int, max_n=CENSUS_MAX_N, cache_dir=None, progress=False) -> Census:
    """Census of Lambda(N), built on first use and cached under CACHE_PATH."""
    if N > min(max_n, CENSUS_MAX_N):
        raise CapExceededError(f"census is limited to N <= {min(max_n, CENSUS_MAX_N)}, requested N={N}")
    return _load(int(N), str(cache_dir) if cache_dir else None, progress)
