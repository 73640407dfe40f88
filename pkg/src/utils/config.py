""" Component registries and the structured experiment config """
import functools
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import hydra
from omegaconf import DictConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from src.utils.errors import ConfigError


def instantiate(registry: Mapping[str, Any], config, *args, partial=False, **kwargs):
    """Builds registry[config._name_] with the remaining config entries as keyword arguments.

    config is a mapping with a `_name_` key or just the name. Targets are callables or dotted
    paths such as 'src.dataloaders.boundary.RandomBC'.
    """
    if config is None:
        return None
    if isinstance(config, str):
        name, options = config, {}
    else:
        options = OmegaConf.to_container(config, resolve=True) if isinstance(config, DictConfig) else dict(config)
        name = options.pop("_name_")
    if name not in registry:
        raise ConfigError(f"unknown component {name!r}, expected one of {sorted(registry)}")
    target = registry[name]
    fn = hydra.utils.get_method(path=target) if isinstance(target, str) else target
    if not callable(fn):
        raise ConfigError(f"registry entry {name!r} is not callable")
    obj = functools.partial(fn, *args, **options, **kwargs)
    return obj if partial else obj()


# Structured schema. Every CLI run is validated against it before anything is computed.

@dataclass
class VolumeConfig:
    N: int = 1
    Ns: List[int] = field(default_factory=lambda: [4, 8, 12])


@dataclass
class ModelConfig:
    beta: float = 1.0
    lam: float = 1.0


@dataclass
class ScheduleConfig:
    l0: float = 5.0
    epsilon: float = 0.1
    # Explicit per-level scales; when given they replace the recurrence level by level
    L_overrides: Optional[List[float]] = None
    l_overrides: Optional[List[float]] = None


@dataclass
class SamplerConfig:
    sweeps: int = 2000
    burn_in: int = 200
    thin: int = 1
    chains: int = 8
    batches: int = 20  # batch-means blocks per chain for Monte Carlo errors


@dataclass
class CapsConfig:
    enumeration_sites: int = 25
    census_max_n: int = 2
    transfer_width: int = 13
    contour_length: Optional[int] = None  # None means 2(2N+1)+8
    cluster_size: int = 4
    polymers: int = 20


@dataclass
class SimulateConfig:
    exact: bool = True
    samples: int = 0


@dataclass
class FreeEnergyConfig:
    method: str = "exact"
    replicas: int = 10
    # characteristic function grid
    t_max: float = 1.0
    t_points: int = 201
    corner_split: bool = False


@dataclass
class FrequencyConfig:
    window: List[List[int]] = field(default_factory=lambda: [[0, 0]])
    radius: float = 0.2
    center: str = "plus"
    n_max: int = 8
    replicas: int = 4
    confidence: float = 2.0
    plot: bool = False
    # distance-to-phases experiment over volume.Ns
    basic_est: bool = False
    alpha: float = 0.0


@dataclass
class InterfaceConfig:
    replicas: int = 50
    control: str = "dobrushin"


@dataclass
class LLTConfig:
    n: int = 10000
    a: float = -1.0
    b: float = 1.0
    delta_exponent: float = 0.3
    tau: float = math.pi / 2
    k: float = 2.0
    slack: float = 0.1
    grid_points: int = 20001


@dataclass
class ValidateConfig:
    c1: float = 6 * math.log(4)
    c2: Optional[float] = None  # None means c1 + 1
    c4: float = 0.1
    c5: float = 0.05
    c6: float = 1.0
    c7: float = 1.0
    c7_corner: float = 4.0
    eta_samples: int = 64
    checks: List[str] = field(
        default_factory=lambda: [
            "geom_balanced", "geom_large", "entropy", "clusters_step_zero",
            "aggregate_bounds", "mayer_totals", "prob_bound", "large_probability",
        ]
    )


@dataclass
class ExperimentConfig:
    seed: int = 0
    threads: int = 1
    out_dir: str = "outputs"
    progress: bool = False
    volume: VolumeConfig = field(default_factory=VolumeConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    ensemble: Dict[str, Any] = field(default_factory=lambda: {"_name_": "random"})
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    caps: CapsConfig = field(default_factory=CapsConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    freeenergy: FreeEnergyConfig = field(default_factory=FreeEnergyConfig)
    frequency: FrequencyConfig = field(default_factory=FrequencyConfig)
    interface: InterfaceConfig = field(default_factory=InterfaceConfig)
    llt: LLTConfig = field(default_factory=LLTConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)


def load_config(path=None, overrides=()) -> DictConfig:
    """Schema defaults <- YAML file <- dotlist overrides. Raises ConfigError on any schema violation."""
    try:
        config = OmegaConf.structured(ExperimentConfig)
        if path is not None:
            config = OmegaConf.merge(config, OmegaConf.load(path))
        if overrides:
            config = OmegaConf.merge(config, OmegaConf.from_dotlist(list(overrides)))
    except (OmegaConfBaseException, OSError) as e:
        raise ConfigError(str(e)) from e
    check_ranges(config)
    return config


def check_ranges(config):
    """Value checks the type schema cannot express."""
    problems = []
    if config.volume.N < 1:
        problems.append("volume.N must be >= 1")
    if any(n < 1 for n in config.volume.Ns):
        problems.append("volume.Ns entries must be >= 1")
    if not config.model.beta >= 0:
        problems.append("model.beta must be >= 0")
    if not -1.0 <= config.model.lam <= 1.0:
        problems.append("model.lam must lie in [-1, 1]")
    if config.schedule.l0 < 2:
        problems.append("schedule.l0 must be >= 2")
    if not config.schedule.epsilon > 0:
        problems.append("schedule.epsilon must be > 0")
    if config.threads < 1:
        problems.append("threads must be >= 1")
    if config.sampler.sweeps < 1 or config.sampler.thin < 1 or config.sampler.chains < 1:
        problems.append("sampler.sweeps, sampler.thin and sampler.chains must be >= 1")
    if config.sampler.batches < 2:
        problems.append("sampler.batches must be >= 2")
    if config.freeenergy.method not in ("exact", "mc"):
        problems.append("freeenergy.method must be 'exact' or 'mc'")
    if config.frequency.center not in ("plus", "minus"):
        problems.append("frequency.center must be 'plus' or 'minus'")
    if config.freeenergy.t_points < 2 or not config.freeenergy.t_max > 0:
        problems.append("freeenergy.t_points must be >= 2 and freeenergy.t_max > 0")
    if config.llt.b <= config.llt.a:
        problems.append("llt.b must exceed llt.a")
    if "_name_" not in config.ensemble:
        problems.append("ensemble needs a _name_ key")
    if problems:
        raise ConfigError("; ".join(problems))
