""" Utils for the experiment loop: logging, config processing and deterministic output files """
import contextlib
import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd
import rich
import rich.syntax
import rich.tree
from omegaconf import DictConfig, OmegaConf
from rich.logging import RichHandler

FLOAT_FORMAT = "%.12g"
RUN_LOG = "run.log"


def get_logger(name=__name__, level=logging.INFO) -> logging.Logger:
    """Initializes a python logger with a single rich console handler on the package root."""

    root = logging.getLogger("src")
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        root.addHandler(RichHandler(show_path=False, rich_tracebacks=True))
        root.propagate = False
    logger = logging.getLogger(name)
    logger.setLevel(level)
    return logger


log = get_logger(__name__)


@contextlib.contextmanager
def run_log(out_dir, level=None):
    """Mirrors the package log into <out_dir>/run.log for the duration of one run."""
    root = logging.getLogger("src")
    handler = logging.FileHandler(Path(out_dir) / RUN_LOG, mode="w")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    old_level = root.level
    if level is not None:
        root.setLevel(level)
    root.addHandler(handler)
    try:
        yield handler.baseFilename
    finally:
        root.removeHandler(handler)
        handler.close()
        root.setLevel(old_level)


def process_config(config: DictConfig) -> DictConfig:
    """Returns a resolved copy; interpolations are fixed before the config is hashed."""
    config = OmegaConf.create(OmegaConf.to_container(config, resolve=True))
    log.debug(f"config {config_hash(config)[:12]}")
    return config


def print_config(config: DictConfig, out_dir=None, console=True) -> rich.tree.Tree:
    """Renders the resolved config as a rich tree: one branch per section, top-level scalars first.

    The tree goes to the console when `console` and to <out_dir>/config_tree.txt when given.
    """
    tree = rich.tree.Tree("CONFIG", style="dim", guide_style="dim")
    scalars = {k: v for k, v in config.items() if not isinstance(v, DictConfig)}
    if scalars:
        tree.add("run", style="dim").add(rich.syntax.Syntax(OmegaConf.to_yaml(OmegaConf.create(scalars)), "yaml"))
    for name, section in config.items():
        if isinstance(section, DictConfig):
            tree.add(str(name), style="dim").add(rich.syntax.Syntax(OmegaConf.to_yaml(section, resolve=True), "yaml"))
    if console:
        rich.print(tree)
    if out_dir is not None:
        with open(Path(out_dir) / "config_tree.txt", "w") as fp:
            rich.print(tree, file=fp)
    return tree


def config_hash(config: DictConfig) -> str:
    text = OmegaConf.to_yaml(config, resolve=True, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def output_header(config: DictConfig) -> dict:
    return {
        "config": OmegaConf.to_container(config, resolve=True),
        "config_hash": config_hash(config),
    }


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if np.isnan(x) or np.isinf(x):
            return str(x)
        return float(FLOAT_FORMAT % x)
    if isinstance(x, complex):
        return [_jsonable(x.real), _jsonable(x.imag)]
    return x


def write_json(path, payload, config=None):
    """Writes payload (with the config header when given) with sorted keys and pinned float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(output_header(config)) if config is not None else {}
    body["result"] = _jsonable(payload)
    with open(path, "w") as f:
        json.dump(body, f, sort_keys=True, indent=2)
        f.write("\n")
    return path


def write_csv(path, rows, config=None):
    """One row per record. The config hash goes into a leading comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    with open(path, "w") as f:
        if config is not None:
            f.write(f"# config_hash={config_hash(config)}\n")
        df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def run_replicas(fn, replicas, threads=1):
    """Maps fn over replica ids on a thread pool; results come back in replica order."""
    replicas = list(replicas)
    if threads <= 1:
        return [fn(r) for r in replicas]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, replicas))


def default_cache_path() -> Path:
    # Cache path is environment variable or <repo>/cache
    if (path := os.getenv("CACHE_PATH")) is None:
        return Path(__file__).parent.parent.parent.absolute() / "cache"
    return Path(path).absolute()
