""" Boundary-condition families used by the experiments """

import numpy as np

from src.dataloaders.base import BoundaryEnsemble, load_boundary
from src.models.ising import BoundaryCondition
from src.models.lattice import build_volume, corner_region
import src.utils as utils
import src.utils.registry as registry
from src.utils import rng as rng_utils
from src.utils.errors import ConfigError, DomainError


class RandomBC(BoundaryEnsemble):
    """i.i.d. symmetric +-1 spins."""

    _name_ = "random"

    def _sample(self, N, rng):
        return BoundaryCondition(rng_utils.spins(rng, 4 * (2 * N + 1)))


class ConstantBC(BoundaryEnsemble):
    _name_ = "constant"

    @property
    def init_defaults(self):
        return {"value": 1}

    def init(self):
        if self.value not in (-1, 1):
            raise ConfigError(f"constant boundary value must be +1 or -1, got {self.value}")

    @property
    def random(self):
        return False

    def _sample(self, N, rng):
        return BoundaryCondition(np.full(4 * (2 * N + 1), self.value, dtype=np.int8))


class DobrushinBC(BoundaryEnsemble):
    """Plus on the upper half of the collar (y >= 0), minus below."""

    _name_ = "dobrushin"

    @property
    def random(self):
        return False

    def _sample(self, N, rng):
        v = build_volume(N)
        return BoundaryCondition(np.where(v.boundary_outer[:, 1] >= 0, 1, -1).astype(np.int8))


class StripBC(BoundaryEnsemble):
    """A run of `length` minus spins starting at ring position `start` in a constant background.

    `start` may be negative to count from the end of the cycle; `side` picks a wall
    (0 right, 1 top, 2 left, 3 bottom) and makes `start` an offset along it.
    """

    _name_ = "strip"

    @property
    def init_defaults(self):
        return {"start": 0, "length": 1, "side": None, "background": 1}

    @property
    def random(self):
        return False

    def _sample(self, N, rng):
        L, M = 2 * N + 1, 4 * (2 * N + 1)
        if not 0 <= self.length <= M:
            raise DomainError(f"strip length {self.length} does not fit a boundary of {M} bonds")
        start = self.start + (self.side * L if self.side is not None else 0)
        eta = np.full(M, self.background, dtype=np.int8)
        eta[(start + np.arange(self.length)) % M] = -self.background
        return BoundaryCondition(eta)


class FrozenCornersBC(BoundaryEnsemble):
    """i.i.d. spins with the corner collar frozen across replicas.

    The collar (boundary bonds within `radius` of a corner) is drawn once from the
    stream keyed by `collar_seed`; the remaining spins are fresh per replica.
    """

    _name_ = "frozen_corners"

    @property
    def init_defaults(self):
        return {"radius": 2.0, "collar_seed": 0}

    def collar(self, N):
        return np.array(corner_region(build_volume(N), self.radius).bonds, dtype=np.int64)

    def _sample(self, N, rng):
        M = 4 * (2 * N + 1)
        frozen = rng_utils.spins(rng_utils.generator(self.collar_seed, N, -1), M)
        eta = rng_utils.spins(rng, M)
        idx = self.collar(N)
        eta[idx] = frozen[idx]
        return BoundaryCondition(eta)


class FileBC(BoundaryEnsemble):
    """A single boundary condition read from a JSON file (absolute, or relative to the data dir)."""

    _name_ = "file"

    @property
    def init_defaults(self):
        return {"path": None}

    def init(self):
        if self.path is None:
            raise ConfigError("file ensemble needs a path")

    @property
    def random(self):
        return False

    def _sample(self, N, rng):
        path = self.data_dir / self.path
        bc = load_boundary(path)
        if bc.N != N:
            raise DomainError(f"{path} holds a boundary condition for N={bc.N}, requested N={N}")
        return bc


def build_ensemble(config, seed=0):
    """Ensemble from a `{_name_: ..., **kwargs}` config."""
    return utils.instantiate(registry.ensemble, config, seed=seed)
