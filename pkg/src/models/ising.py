""" Finite-volume Ising model with boundary field: energies, exact and constrained partition functions.

H^eta(sigma) = -beta sum_<xy> (s_x s_y - 1) - lam beta sum_{x in Lambda, y outside} s_x eta_y

Everything is computed in the log domain. Exact evaluations enumerate configurations in
bit-unpacked chunks (see functional/enumerate.py) and are guarded by a site cap; the
row transfer matrix covers widths up to 13.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp
from tqdm.auto import tqdm

from src.models.functional.enumerate import boundary_field, config_chunks, energies, n_chunks, unpack_spins
from src.models.functional.regions import exterior_sign
from src.models.functional.transfer import transfer_log_partition
from src.models.lattice import Volume
from src.utils.errors import CapExceededError, DomainError
from src.utils.experiment import get_logger

log = get_logger(__name__)

ENUMERATION_SITES = 25


@dataclass(frozen=True)
class CouplingParams:
    beta: float
    lam: float = 1.0

    def __post_init__(self):
        # beta = 0 is accepted as the paramagnetic limit
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise DomainError(f"beta must be a finite nonnegative number, got {self.beta}")
        if not -1.0 <= self.lam <= 1.0:
            raise DomainError(f"lam must lie in [-1, 1], got {self.lam}")


class BoundaryCondition:
    """Exterior spins, one per boundary bond, counterclockwise from the site (N+1, -N)."""

    def __init__(self, values, tag: Optional[str] = None):
        values = np.asarray(values)
        if values.ndim != 1 or len(values) % 4 or (len(values) // 4) % 2 == 0 or len(values) < 12:
            raise DomainError(f"a boundary condition has 4(2N+1) entries, got shape {values.shape}")
        if not np.isin(values, (-1, 1)).all():
            raise DomainError("boundary spins must be +1 or -1")
        self.values = values.astype(np.int8)
        self.values.flags.writeable = False
        self.tag = tag

    @property
    def N(self):
        return (len(self.values) // 4 - 1) // 2

    def __len__(self):
        return len(self.values)

    def __neg__(self):
        return BoundaryCondition(-self.values, tag=f"-{self.tag}" if self.tag else None)

    def __eq__(self, other):
        return isinstance(other, BoundaryCondition) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"BoundaryCondition(N={self.N}, tag={self.tag!r})"

    def to_json(self):
        payload = {"N": self.N, "eta": self.values.tolist()}
        if self.tag:
            payload["tag"] = self.tag
        return payload

    @classmethod
    def from_json(cls, payload):
        if isinstance(payload, dict):
            bc = cls(payload["eta"], tag=payload.get("tag"))
            if "N" in payload and payload["N"] != bc.N:
                raise DomainError(f"boundary file says N={payload['N']} but holds {len(bc)} spins")
            return bc
        return cls(payload)


def as_eta(eta, volume: Volume) -> np.ndarray:
    """ The (M,) float array of boundary spins for `volume` """
    values = eta.values if isinstance(eta, BoundaryCondition) else np.asarray(eta)
    if values.shape != (volume.n_boundary,):
        raise DomainError(f"boundary condition has shape {values.shape}, expected ({volume.n_boundary},)")
    return values.astype(np.float64)


def as_sigma(sigma, volume: Volume) -> np.ndarray:
    sigma = np.asarray(sigma)
    if sigma.shape != (volume.n_sites,):
        raise DomainError(f"spin configuration has shape {sigma.shape}, expected ({volume.n_sites},)")
    if not np.isin(sigma, (-1, 1)).all():
        raise DomainError("spins must be +1 or -1")
    return sigma.astype(np.int8)


@dataclass(frozen=True, eq=False)
class LocalObservable:
    """A function of the spins in a finite window.

    window : site indices
    table  : (2^|X|,) values; entry c is the value when bit i of c marks a minus spin at window[i]
    """

    window: Tuple[int, ...]
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        table = np.asarray(self.table)
        if table.shape != (1 << len(self.window),):
            raise DomainError(f"observable table needs {1 << len(self.window)} entries, got {table.shape}")
        object.__setattr__(self, "table", table)
        object.__setattr__(self, "window", tuple(int(i) for i in self.window))

    @classmethod
    def spin(cls, site: int):
        return cls((site,), np.array([1.0, -1.0]))

    @classmethod
    def constant(cls, value=1.0):
        return cls((), np.array([float(value)]))

    @property
    def norm(self):
        return float(np.abs(self.table).max())

    def codes(self, spins):
        spins = np.atleast_2d(spins)
        if not self.window:
            return np.zeros(len(spins), dtype=np.int64)
        bits = (spins[:, list(self.window)] < 0).astype(np.int64)
        return (bits << np.arange(len(self.window), dtype=np.int64)).sum(axis=1)

    def __call__(self, spins):
        """ (B, n) -> (B,) """
        return self.table[self.codes(spins)]


def window_sites(volume: Volume, coords: Sequence[Sequence[int]]) -> Tuple[int, ...]:
    return tuple(volume.site_index(int(x), int(y)) for x, y in coords)


def hamiltonian(sigma, eta, volume: Volume, params: CouplingParams) -> float:
    sigma = as_sigma(sigma, volume)
    return float(energies(sigma[None], as_eta(eta, volume), volume, params.beta, params.lam)[0])


def _check_enumerable(volume: Volume, max_sites: int):
    if volume.n_sites > max_sites:
        raise CapExceededError(f"exact enumeration over {volume.n_sites} sites exceeds the cap of {max_sites}")


def log_weight_chunks(volume: Volume, eta, params: CouplingParams, max_sites=ENUMERATION_SITES, progress=False):
    """Yields (codes, spins, -H) over all configurations."""
    _check_enumerable(volume, max_sites)
    eta = as_eta(eta, volume)
    chunks = config_chunks(volume.n_sites)
    for codes, spins in tqdm(chunks, total=n_chunks(volume.n_sites), disable=not progress, desc="enumerate"):
        yield codes, spins, -energies(spins, eta, volume, params.beta, params.lam)


def exact_partition(volume: Volume, eta, params: CouplingParams, stream=False, max_sites=ENUMERATION_SITES, progress=False):
    """log Z by brute force enumeration.

    With stream=True returns (log Z, generator of (codes, log-probability) chunks); the
    generator enumerates a second time so memory stays at one chunk.
    """
    acc = [logsumexp(lw) for _, _, lw in log_weight_chunks(volume, eta, params, max_sites, progress)]
    log_z = float(logsumexp(acc))
    if not stream:
        return log_z

    def probabilities():
        for codes, _, lw in log_weight_chunks(volume, eta, params, max_sites):
            yield codes, lw - log_z

    return log_z, probabilities()


def transfer_matrix_logZ(volume: Volume, eta, params: CouplingParams, max_width=13) -> float:
    h = boundary_field(as_eta(eta, volume), volume).reshape(volume.L, volume.L)
    return transfer_log_partition(h, params.beta, params.lam, max_width=max_width)


def constrained_split(sigma, volume: Volume) -> int:
    """ The spin on the exterior of all contours of sigma: +1 iff sigma is in Omega^+ """
    return int(exterior_sign(as_sigma(sigma, volume)[None], volume)[0])


def signed_chunks(volume: Volume, max_sites=ENUMERATION_SITES, census_max_n=2, progress=False):
    """Yields (spins, exterior sign) over all configurations.

    Small volumes classify on the fly; larger ones read the sign table of the census.
    """
    _check_enumerable(volume, max_sites)
    if volume.N >= 2:
        from src.dataloaders.census import load_census

        yield from load_census(volume.N, max_n=census_max_n, progress=progress).signed_chunks()
        return
    for _, spins in config_chunks(volume.n_sites):
        yield spins, exterior_sign(spins, volume)


def _constrained_by_enumeration(volume, eta, params, max_sites):
    eta = as_eta(eta, volume)
    plus, minus = [], []
    for spins, sign in signed_chunks(volume, max_sites):
        lw = -energies(spins, eta, volume, params.beta, params.lam)
        plus.append(logsumexp(np.where(sign > 0, lw, -np.inf)))
        minus.append(logsumexp(np.where(sign < 0, lw, -np.inf)))
    return float(logsumexp(plus)), float(logsumexp(minus))


def constrained_logZ(
    volume: Volume,
    eta,
    params: CouplingParams,
    method="exact",
    samples=None,
    max_sites=ENUMERATION_SITES,
    census_max_n=2,
) -> Tuple[float, float]:
    """(log Z^+, log Z^-) of the Gibbs measure restricted to Omega^+ / Omega^-.

    exact : direct enumeration for N = 1, the cached census for N = 2
    mc    : Z^pm = Z * mu(Omega^pm), with Z from the transfer matrix and mu(Omega^pm)
            the fraction of `samples` (S, n) in each class; an empty class gives -inf
    """
    if method == "exact":
        _check_enumerable(volume, max_sites)
        if volume.N == 1:
            return _constrained_by_enumeration(volume, eta, params, max_sites)
        from src.dataloaders.census import load_census

        return load_census(volume.N, max_n=census_max_n).constrained_log_partition(as_eta(eta, volume), params.beta, params.lam)
    if method == "mc":
        if samples is None or len(samples) == 0:
            raise DomainError("mc mode needs a nonempty sample array")
        signs = exterior_sign(np.asarray(samples), volume)
        p = float(np.mean(signs > 0))
        log_z = transfer_matrix_logZ(volume, eta, params)
        with np.errstate(divide="ignore"):
            return log_z + float(np.log(p)), log_z + float(np.log1p(-p))
    raise DomainError(f"unknown method {method!r}, expected 'exact' or 'mc'")


def mixture_decomposition_check(volume: Volume, eta, params: CouplingParams, f: LocalObservable, max_sites=ENUMERATION_SITES) -> float:
    """| mu(f) - w+ nu+(f) - w- nu-(f) | with w+ = 1 / (1 + Z-/Z+) and w- = 1 / (1 + Z+/Z-)."""
    eta = as_eta(eta, volume)
    # per chunk and class: log of the summed weight and the weighted mean of f
    parts = {1: [], -1: [], 0: []}
    for spins, sign in signed_chunks(volume, max_sites):
        lw = -energies(spins, eta, volume, params.beta, params.lam)
        values = f(spins)
        for s, sel in ((1, sign > 0), (-1, sign < 0), (0, np.ones(len(sign), dtype=bool))):
            if sel.any():
                lz = logsumexp(lw[sel])
                parts[s].append((lz, float(np.exp(lw[sel] - lz) @ values[sel])))

    def average(s):
        lz = np.array([z for z, _ in parts[s]])
        means = np.array([m for _, m in parts[s]])
        total = logsumexp(lz)
        return total, float(np.exp(lz - total) @ means)

    _, mu = average(0)
    log_zp, nu_p = average(1)
    log_zm, nu_m = average(-1)
    w_p = 1.0 / (1.0 + np.exp(log_zm - log_zp))
    w_m = 1.0 / (1.0 + np.exp(log_zp - log_zm))
    residual = abs(mu - w_p * nu_p - w_m * nu_m)
    log.debug(f"mixture: mu={mu:.6g} nu+={nu_p:.6g} nu-={nu_m:.6g} residual={residual:.3g}")
    return float(residual)


MAX_WINDOW = 8


def marginal_pmf(samples, window: Sequence[int], weights=None) -> np.ndarray:
    """Empirical (or weighted) law of the spins in `window`: (2^|X|,)"""
    window = tuple(window)
    if len(window) > MAX_WINDOW:
        raise CapExceededError(f"window of {len(window)} sites exceeds the cap of {MAX_WINDOW}")
    obs = LocalObservable(window, np.zeros(1 << len(window)))
    codes = obs.codes(np.atleast_2d(samples))
    pmf = np.bincount(codes, weights=weights, minlength=1 << len(window)).astype(np.float64)
    return pmf / pmf.sum()


def exact_marginal(volume: Volume, eta, params: CouplingParams, window: Sequence[int], max_sites=ENUMERATION_SITES):
    log_z, chunks = exact_partition(volume, eta, params, stream=True, max_sites=max_sites)
    pmf = np.zeros(1 << len(window))
    obs = LocalObservable(tuple(window), np.zeros(1 << len(window)))
    for codes, lp in chunks:
        spins = unpack_spins(codes, volume.n_sites)
        pmf += np.bincount(obs.codes(spins), weights=np.exp(lp), minlength=len(pmf))
    return pmf


def seminorm_distance(mu, nu, window: Sequence[int]) -> float:
    """|| mu - nu ||_X as the L1 distance of the X-marginals, in [0, 2].

    mu, nu : sample arrays (S, n) or already-marginalized pmfs of length 2^|X|
    """
    window = tuple(window)

    def pmf(x):
        x = np.asarray(x)
        if x.ndim == 1 and len(x) == 1 << len(window):
            if len(window) > MAX_WINDOW:
                raise CapExceededError(f"window of {len(window)} sites exceeds the cap of {MAX_WINDOW}")
            return x.astype(np.float64)
        return marginal_pmf(x, window)

    return float(np.abs(pmf(mu) - pmf(nu)).sum())
