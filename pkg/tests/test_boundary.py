import numpy as np
import pytest

from src.dataloaders.base import BoundaryEnsemble, load_boundary, save_boundary
from src.dataloaders.boundary import ConstantBC, DobrushinBC, FileBC, FrozenCornersBC, RandomBC, StripBC, build_ensemble
from src.models.ising import BoundaryCondition
from src.utils.errors import ConfigError, DomainError


def test_registry():
    assert set(BoundaryEnsemble.registry) >= {"random", "constant", "dobrushin", "strip", "frozen_corners", "file"}
    assert isinstance(build_ensemble({"_name_": "strip", "start": 2}), StripBC)
    with pytest.raises(ConfigError):
        build_ensemble({"_name_": "no_such_ensemble"})
    with pytest.raises(ConfigError):
        build_ensemble({"_name_": "constant", "colour": 1})


def test_random_replicas():
    ens = RandomBC(seed=3)
    a, b = ens.sample(5, 0), ens.sample(5, 1)
    assert len(a) == 44
    assert a == RandomBC(seed=3).sample(5, 0)
    assert a != b
    assert b.tag == "random:3:1"
    assert [bc.tag for bc in ens.replicas(1, 3)] == ["random:3:0", "random:3:1", "random:3:2"]
    with pytest.raises(DomainError):
        ens.sample(0)


def test_constant():
    assert (ConstantBC(value=-1).sample(2).values == -1).all()
    assert not ConstantBC().random
    with pytest.raises(ConfigError):
        ConstantBC(value=0)


def test_dobrushin():
    bc = DobrushinBC().sample(1)
    assert bc.values.tolist() == [-1, 1, 1, 1, 1, 1, 1, 1, -1, -1, -1, -1]


def test_strip():
    eta = StripBC(start=1, length=3).sample(1).values
    assert np.nonzero(eta < 0)[0].tolist() == [1, 2, 3]
    # bottom wall offset -1 wraps onto the start of the right wall
    eta = StripBC(start=-1, length=7, side=3).sample(1).values
    assert np.nonzero(eta < 0)[0].tolist() == [0, 1, 2, 8, 9, 10, 11]
    with pytest.raises(DomainError):
        StripBC(length=13).sample(1)


def test_frozen_corners():
    ens = FrozenCornersBC(seed=0, radius=0.0)
    idx = ens.collar(1)
    assert len(idx) == 8
    a, b = ens.sample(1, 0), ens.sample(1, 1)
    assert (a.values[idx] == b.values[idx]).all()
    everything = FrozenCornersBC(seed=0, radius=100.0)
    assert everything.sample(2, 0) == everything.sample(2, 5)


def test_file_ensemble(tmp_path):
    bc = BoundaryCondition([1, -1, 1, 1, 1, 1, -1, -1, 1, 1, 1, 1], tag="hand")
    save_boundary(tmp_path / "eta.json", bc)
    assert load_boundary(tmp_path / "eta.json").tag == "hand"
    ens = FileBC(path="eta.json", data_dir=tmp_path)
    assert ens.sample(1) == bc
    with pytest.raises(DomainError):
        ens.sample(2)
    with pytest.raises(ConfigError):
        FileBC()
    with pytest.raises(ConfigError):
        load_boundary(tmp_path / "missing.json")
