""" Single-site Metropolis dynamics for the Ising model with a boundary field.

Sites are updated by checkerboard colour, all chains at once. Each chain draws its
uniforms from its own counter-based stream keyed by (seed, replica, chain), so the
sample stream does not depend on how replicas are spread over threads.
"""
from typing import Iterator

import numpy as np
from tqdm.auto import tqdm

from src.models.functional.enumerate import boundary_field
from src.models.ising import CouplingParams, as_eta
from src.models.lattice import Volume
from src.utils import rng as rng_utils
from src.utils.errors import DomainError


def neighbor_table(volume: Volume):
    """ (n, 4) neighbour indices inside the volume; missing neighbours point at the padding slot n """
    L, n = volume.L, volume.n_sites
    xs, ys = volume.sites.T + volume.N
    nb = np.full((n, 4), n, dtype=np.int64)
    for d, (dx, dy) in enumerate(((0, 1), (1, 0), (0, -1), (-1, 0))):
        x, y = xs + dx, ys + dy
        ok = (x >= 0) & (x < L) & (y >= 0) & (y < L)
        nb[ok, d] = y[ok] * L + x[ok]
    return nb


class MetropolisSampler:
    """C independent Metropolis chains on one volume and boundary condition.

    state : (C, n) int8
    """

    def __init__(self, volume: Volume, eta, params: CouplingParams, seed=0, replica=0, chains=1, init="random"):
        if chains < 1:
            raise DomainError(f"need at least one chain, got {chains}")
        self.volume = volume
        self.params = params
        self.field = params.lam * boundary_field(as_eta(eta, volume), volume)  # (n,)
        self.neighbors = neighbor_table(volume)
        parity = volume.sites.sum(axis=1) & 1
        self.colours = [np.nonzero(parity == c)[0] for c in (0, 1)]
        self.rngs = [rng_utils.generator(seed, replica, c) for c in range(chains)]
        if init == "random":
            self.state = np.stack([rng_utils.spins(r, volume.n_sites) for r in self.rngs])
        elif init in ("plus", "minus"):
            self.state = np.full((chains, volume.n_sites), 1 if init == "plus" else -1, dtype=np.int8)
        else:
            raise DomainError(f"unknown initial state {init!r}")
        self.accepted = 0
        self.proposed = 0

    @property
    def chains(self):
        return len(self.rngs)

    def _half_sweep(self, sites):
        beta = self.params.beta
        padded = np.concatenate([self.state, np.zeros((self.chains, 1), dtype=np.int8)], axis=1)
        local = padded[:, self.neighbors[sites]].sum(axis=-1).astype(np.float64)  # (C, |sites|)
        s = self.state[:, sites].astype(np.float64)
        delta = 2.0 * beta * s * (local + self.field[sites])
        u = np.stack([r.random(len(sites)) for r in self.rngs])
        flip = np.log(u) < -delta
        self.state[:, sites] = np.where(flip, -self.state[:, sites], self.state[:, sites])
        self.accepted += int(flip.sum())
        self.proposed += flip.size

    def sweep(self, n=1):
        for _ in range(n):
            for sites in self.colours:
                self._half_sweep(sites)
        return self.state

    @property
    def acceptance(self):
        return self.accepted / max(self.proposed, 1)

    def samples(self, sweeps, burn_in=0, thin=1, progress=False) -> Iterator[np.ndarray]:
        """Yields a copy of the (C, n) state every `thin` sweeps after `burn_in` sweeps."""
        if sweeps < 1 or thin < 1 or burn_in < 0:
            raise DomainError("sweeps and thin must be >= 1, burn_in >= 0")
        self.sweep(burn_in)
        for t in tqdm(range(1, sweeps + 1), disable=not progress, desc="sweeps"):
            self.sweep()
            if t % thin == 0:
                yield self.state.copy()


def metropolis_sampler(volume: Volume, eta, params: CouplingParams, seed, sweeps, thin=1, burn_in=0, chains=1, replica=0):
    """Stream of (C, n) spin arrays; a fixed (seed, replica) reproduces the stream exactly."""
    sampler = MetropolisSampler(volume, eta, params, seed=seed, replica=replica, chains=chains)
    return sampler.samples(sweeps, burn_in=burn_in, thin=thin)


def collect(stream) -> np.ndarray:
    """ Stacks a sample stream into (S, n) """
    batches = list(stream)
    if not batches:
        return np.zeros((0, 0), dtype=np.int8)
    return np.concatenate(batches, axis=0)
