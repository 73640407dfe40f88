import json
from pathlib import Path

import pytest

from src.cli import main
from src.utils.config import instantiate, load_config
from src.utils.experiment import get_logger, print_config, process_config, run_log
from src.utils.errors import ConfigError

CONFIGS = Path(__file__).parents[1] / "configs"


def read(path):
    with open(path) as f:
        return json.load(f)


def test_lltcheck(tmp_path):
    args = ["lltcheck", "--config", str(CONFIGS / "llt.yaml"), "--out-dir", str(tmp_path)]
    assert main(args) == 0
    first = (tmp_path / "llt.json").read_bytes()
    assert main(args) == 0
    assert (tmp_path / "llt.json").read_bytes() == first

    payload = read(tmp_path / "llt.json")
    assert payload["result"]["status"] == "holds"
    assert payload["result"]["quadrature_error"] < 1e-8
    assert len(payload["config_hash"]) == 64
    assert (tmp_path / "run.log").exists()


def test_simulate(tmp_path):
    assert main(["simulate", "--out-dir", str(tmp_path), "ensemble._name_=constant", "model.beta=1.0"]) == 0
    result = read(tmp_path / "simulate.json")["result"]
    assert result["F"] > 0
    assert result["log_Z_plus"] > result["log_Z_minus"]


def test_overrides_after_options(tmp_path):
    args = ["simulate", "--seed", "1", "--out-dir", str(tmp_path), "ensemble._name_=constant", "model.beta=1.0"]
    assert main(args) == 0
    config = read(tmp_path / "simulate.json")["config"]
    assert config["seed"] == 1
    assert config["ensemble"]["_name_"] == "constant"
    assert config["model"]["beta"] == 1.0
    # overrides on both sides of the options
    assert main(["simulate", "model.beta=2.0", "--out-dir", str(tmp_path), "ensemble._name_=constant"]) == 0
    config = read(tmp_path / "simulate.json")["config"]
    assert config["model"]["beta"] == 2.0 and config["ensemble"]["_name_"] == "constant"


@pytest.mark.parametrize("method", ["exact", "mc"])
def test_threads_do_not_change_results(tmp_path, method):
    overrides = [
        "volume.Ns=[1]", "freeenergy.replicas=8", "freeenergy.t_points=11", f"freeenergy.method={method}",
        "sampler.sweeps=200", "sampler.burn_in=20", "sampler.chains=2",
    ]
    outputs = []
    for threads in (1, 4):
        out = tmp_path / f"threads{threads}"
        assert main(["freeenergy", "--seed", "7", "--threads", str(threads), "--out-dir", str(out), *overrides]) == 0
        # the header carries the config hash, which includes threads and out_dir
        body = (out / "freeenergy.csv").read_text().split("\n", 1)[1]
        result = json.dumps(read(out / "freeenergy.json")["result"], sort_keys=True)
        outputs.append((body, result))
    assert outputs[0] == outputs[1]


def test_freeenergy_exact(tmp_path):
    overrides = ["volume.Ns=[1]", "freeenergy.replicas=4", "freeenergy.t_points=11"]
    assert main(["freeenergy", "--out-dir", str(tmp_path), *overrides]) == 0
    assert (tmp_path / "freeenergy.csv").read_text().startswith("# config_hash=")


@pytest.mark.parametrize("override", ["model.beta=-1", "schedule.l0=1", "no_such_key=3", "freeenergy.method=magic"])
def test_bad_config(tmp_path, override):
    assert main(["lltcheck", "--out-dir", str(tmp_path), override]) == 2


def test_missing_config_file(tmp_path):
    assert main(["lltcheck", "--config", str(tmp_path / "missing.yaml")]) == 2


def test_load_config_defaults():
    config = load_config(str(CONFIGS / "default.yaml"))
    assert config.volume.N == 1
    with pytest.raises(ConfigError):
        load_config(None, ["model.lam=2"])


def test_census_cap_exit_code(tmp_path):
    assert main(["expand", "--out-dir", str(tmp_path), "volume.N=3"]) == 3


def test_run_log_and_config_tree(tmp_path):
    config = process_config(load_config(overrides=["model.beta=1.5"]))
    log = get_logger("src.tests")
    with run_log(tmp_path):
        log.info("inside the run")
        tree = print_config(config, tmp_path, console=False)
    log.info("after the run")
    text = (tmp_path / "run.log").read_text()
    assert "inside the run" in text and "after the run" not in text
    assert tree.label == "CONFIG"
    assert "beta: 1.5" in (tmp_path / "config_tree.txt").read_text()


def test_instantiate():
    registry = {"pair": lambda a, b=0: (a, b), "path": "math.hypot"}
    assert instantiate(registry, {"_name_": "pair", "b": 2}, 1) == (1, 2)
    assert instantiate(registry, "pair", 3) == (3, 0)
    assert instantiate(registry, {"_name_": "path"}, 3.0, 4.0) == 5.0
    assert instantiate(registry, None) is None
    assert instantiate(registry, "pair", partial=True)(5) == (5, 0)
    with pytest.raises(ConfigError):
        instantiate(registry, "missing")
