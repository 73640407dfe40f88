""" Boundary-condition ensembles: the random environments every experiment draws from """

import json
import os
from pathlib import Path

from src.models.ising import BoundaryCondition
from src.utils import rng as rng_utils
from src.utils.errors import ConfigError, DomainError

# Default data path is environment variable or <repo>/data
if (default_data_path := os.getenv("DATA_PATH")) is None:
    default_data_path = Path(__file__).parent.parent.parent.absolute()
    default_data_path = default_data_path / "data"
else:
    default_data_path = Path(default_data_path).absolute()


class BoundaryEnsemble:
    """A (possibly degenerate) law on boundary conditions of every volume size.

    Replica r of volume N is a pure function of (seed, N, r); subclasses implement `_sample`.
    """

    registry = {}
    _name_ = NotImplementedError("Ensemble must have shorthand name")

    # Subclasses list their default arguments here; they are registered as attributes
    @property
    def init_defaults(self):
        return {}

    # https://www.python.org/dev/peps/pep-0487/#subclass-registration
    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.registry[cls._name_] = cls

    def __init__(self, _name_=None, seed=0, data_dir=None, **ensemble_cfg):
        assert _name_ in (None, self._name_)
        self.seed = seed
        self.data_dir = Path(data_dir).absolute() if data_dir is not None else default_data_path

        init_args = self.init_defaults.copy()
        unknown = set(ensemble_cfg) - set(init_args)
        if unknown:
            raise ConfigError(f"ensemble {self._name_!r} got unknown arguments {sorted(unknown)}")
        init_args.update(ensemble_cfg)
        for k, v in init_args.items():
            setattr(self, k, v)
        self.init()

    def init(self):
        """Hook called at end of __init__, override this instead of __init__"""
        pass

    @property
    def random(self):
        """Whether replicas differ from each other."""
        return True

    def _sample(self, N, rng):
        raise NotImplementedError

    def sample(self, N: int, replica: int = 0) -> BoundaryCondition:
        if N < 1:
            raise DomainError(f"volume half-side must be >= 1, got {N}")
        bc = self._sample(N, rng_utils.generator(self.seed, N, replica))
        bc.tag = f"{self}:{self.seed}:{replica}"
        return bc

    def replicas(self, N: int, count: int):
        return [self.sample(N, r) for r in range(count)]

    def __str__(self):
        return self._name_


def save_boundary(path, bc: BoundaryCondition):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(bc.to_json(), f)
        f.write("\n")
    return path


def load_boundary(path) -> BoundaryCondition:
    try:
        with open(path) as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read boundary condition from {path}: {e}") from e
    return BoundaryCondition.from_json(payload)
