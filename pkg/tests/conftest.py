import numpy as np
import pytest

from src.dataloaders.census import load_census
from src.models.ising import CouplingParams
from src.models.lattice import build_volume
from src.models.multiscale.schedule import build_schedule


@pytest.fixture(scope="session", autouse=True)
def cache_path(tmp_path_factory):
    mp = pytest.MonkeyPatch()
    path = tmp_path_factory.mktemp("cache")
    mp.setenv("CACHE_PATH", str(path))
    yield path
    mp.undo()


@pytest.fixture(scope="session")
def v1():
    return build_volume(1)


@pytest.fixture(scope="session")
def v2():
    return build_volume(2)


@pytest.fixture(scope="session")
def census1(cache_path):
    return load_census(1)


@pytest.fixture(scope="session")
def census2(cache_path):
    return load_census(2)


@pytest.fixture
def params():
    return CouplingParams(beta=1.0, lam=1.0)


@pytest.fixture
def schedule1():
    return build_schedule(5.0, 0.1, 1)


@pytest.fixture
def random_eta():
    def make(volume, seed=0):
        rng = np.random.default_rng(seed)
        return rng.choice(np.array([-1, 1], dtype=np.int8), size=volume.n_boundary)

    return make


def spins_with(volume, minus_sites, background=1):
    """ Configuration equal to `background` except at the given (x, y) sites """
    sigma = np.full(volume.n_sites, background, dtype=np.int8)
    for x, y in minus_sites:
        sigma[volume.site_index(x, y)] = -background
    return sigma
