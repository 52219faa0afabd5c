"""Run configuration: JSON file plus command-line overrides.

A config is a flat JSON object; unknown keys are rejected rather than
ignored so typos fail fast.  Command-line overrides are key=value
strings applied on top of the file, coerced to the field's type.
"""

import dataclasses
import json
from dataclasses import dataclass, field

from .core import OPTIMIZER_KINDS, SHAPING_KINDS, PopulationConfig
from .importance import IWConfig
from .objectives import MlpPolicy, PointMassObjective, make_benchmark

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "apply_overrides",
    "config_as_dict",
    "make_objective",
    "make_population_config",
    "make_iw_config",
]

OBJECTIVES = ("pointmass", "sphere", "rastrigin", "rosenbrock")


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


@dataclass
class RunConfig:
    """Everything one training run needs, with desk-scale defaults."""

    # objective
    objective: str = "pointmass"
    dim: int = 10              # benchmark objectives only
    hidden: int = 64           # point-mass policy width
    horizon: int = 50
    n_eval: int = 30

    # noise table
    noise_seed: int = 7
    noise_table_len: int = 10_000_000

    # population and updates
    sigma: float = 0.02
    batch_pairs: int = 128
    mirrored: bool = True
    fitness_shaping: str = "centered_rank"
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    l2_coeff: float = 0.0

    # batch reuse
    K: int = 0
    ess_min_fraction: float = 0.0
    weight_sum_min: float = 1e-8
    iw_uses_raw_returns: bool = False
    reset_adam_per_batch: bool = False

    # initial parameters: scale of the seeded random start (0 = zeros);
    # a zero start is a saddle for the two-layer policy, so keep > 0
    # when training pointmass
    init_scale: float = 0.05

    # execution
    workers: int = 0           # 0 = one per CPU
    iterations: int = 200
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    log_every: int = 1
    out_dir: str = "runs/latest"

    # summaries: threshold overrides the fraction-of-baseline rule
    threshold: float | None = None
    threshold_fraction: float = 0.9

    def validate(self) -> None:
        checks = [
            (self.objective in OBJECTIVES, f"objective must be one of {OBJECTIVES}"),
            (self.dim >= 1, "dim must be >= 1"),
            (self.hidden >= 1, "hidden must be >= 1"),
            (self.horizon >= 1, "horizon must be >= 1"),
            (self.n_eval >= 1, "n_eval must be >= 1"),
            (self.noise_table_len >= 1, "noise_table_len must be >= 1"),
            (self.sigma > 0, "sigma must be > 0"),
            (self.batch_pairs >= 1, "batch_pairs must be >= 1"),
            (
                self.fitness_shaping in SHAPING_KINDS,
                f"fitness_shaping must be one of {SHAPING_KINDS}",
            ),
            (self.learning_rate > 0, "learning_rate must be > 0"),
            (self.optimizer in OPTIMIZER_KINDS, f"optimizer must be one of {OPTIMIZER_KINDS}"),
            (self.l2_coeff >= 0, "l2_coeff must be >= 0"),
            (self.K >= 0, "K must be >= 0"),
            (0 <= self.ess_min_fraction <= 1, "ess_min_fraction must be in [0, 1]"),
            (self.weight_sum_min > 0, "weight_sum_min must be > 0"),
            (self.init_scale >= 0, "init_scale must be >= 0"),
            (self.workers >= 0, "workers must be >= 0"),
            (self.iterations >= 0, "iterations must be >= 0"),
            (len(self.seeds) >= 1, "seeds must be non-empty"),
            (self.log_every >= 1, "log_every must be >= 1"),
            (
                self.threshold is None or isinstance(self.threshold, (int, float)),
                "threshold must be a number or null",
            ),
            (0 < self.threshold_fraction <= 1, "threshold_fraction must be in (0, 1]"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def load_config(path) -> RunConfig:
    """Read a JSON config; unknown keys raise ConfigError."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = RunConfig(**data)
    cfg.validate()
    return cfg


def _coerce(name: str, text: str):
    kind = _FIELDS[name].type
    try:
        if name == "seeds":
            return [int(part) for part in text.split(",") if part != ""]
        if name == "threshold":
            return None if text.lower() in ("none", "null") else float(text)
        if kind is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {text!r}")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r} ({exc})") from exc


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply key=value strings on top of cfg; returns a new config."""
    updates = {}
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        name, _, text = item.partition("=")
        name = name.strip()
        if name not in _FIELDS:
            raise ConfigError(f"unknown config key: {name}")
        updates[name] = _coerce(name, text.strip())
    new_cfg = dataclasses.replace(cfg, **updates)
    new_cfg.validate()
    return new_cfg


def config_as_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def make_objective(cfg: RunConfig):
    if cfg.objective == "pointmass":
        return PointMassObjective(MlpPolicy(cfg.hidden), horizon=cfg.horizon)
    return make_benchmark(cfg.objective, cfg.dim)


def make_population_config(cfg: RunConfig) -> PopulationConfig:
    return PopulationConfig(
        sigma=cfg.sigma,
        batch_pairs=cfg.batch_pairs,
        mirrored=cfg.mirrored,
        fitness_shaping=cfg.fitness_shaping,
        learning_rate=cfg.learning_rate,
        optimizer=cfg.optimizer,
        adam_beta1=cfg.adam_beta1,
        adam_beta2=cfg.adam_beta2,
        adam_eps=cfg.adam_eps,
        l2_coeff=cfg.l2_coeff,
    )


def make_iw_config(cfg: RunConfig) -> IWConfig:
    return IWConfig(
        K=cfg.K,
        ess_min_fraction=cfg.ess_min_fraction,
        weight_sum_min=cfg.weight_sum_min,
        iw_uses_raw_returns=cfg.iw_uses_raw_returns,
        reset_adam_per_batch=cfg.reset_adam_per_batch,
    )
