"""Population setup, fitness shaping, the basic gradient estimate, updates.

The search distribution is an isotropic Gaussian around the current
parameters.  Each batch evaluates the objective at params + sigma * sign
* window for every sampled handle, turns the raw returns into shaped
fitness values, and averages the perturbations weighted by fitness into
an ascent direction.
"""

from dataclasses import dataclass, field

import numpy as np

from .noise import NoiseTable, PerturbationHandle, perturbation_window

__all__ = [
    "PopulationConfig",
    "OptimizerState",
    "BatchRecord",
    "shape_fitness",
    "estimate_gradient_vanilla",
    "apply_update",
]

SHAPING_KINDS = ("centered_rank", "raw")
OPTIMIZER_KINDS = ("adam", "sgd")


@dataclass(frozen=True)
class PopulationConfig:
    """Search, shaping, and update hyperparameters for one run."""

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

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.batch_pairs < 1:
            raise ValueError(f"batch_pairs must be >= 1, got {self.batch_pairs}")
        if self.fitness_shaping not in SHAPING_KINDS:
            raise ValueError(f"unknown fitness_shaping {self.fitness_shaping!r}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZER_KINDS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.l2_coeff < 0:
            raise ValueError(f"l2_coeff must be >= 0, got {self.l2_coeff}")


@dataclass
class OptimizerState:
    """Adam moments and step counter; SGD only uses the counter."""

    step_count: int
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def initial(cls, dim: int) -> "OptimizerState":
        return cls(step_count=0, m=np.zeros(dim), v=np.zeros(dim))

    def reset(self) -> None:
        self.step_count = 0
        self.m[:] = 0.0
        self.v[:] = 0.0


@dataclass
class BatchRecord:
    """One batch of evaluations, kept immutable for later reuse.

    base_params is the parameter vector the perturbations were drawn
    around; it is frozen so reuse steps can keep referring to it after
    the live parameters have moved on.
    """

    base_params: np.ndarray
    handles: list[PerturbationHandle]
    raw_returns: np.ndarray
    shaped_fitness: np.ndarray
    env_steps: int

    def __post_init__(self) -> None:
        base = np.array(self.base_params, dtype=np.float64, copy=True)
        base.flags.writeable = False
        self.base_params = base
        self.raw_returns = np.asarray(self.raw_returns, dtype=np.float64)
        self.shaped_fitness = np.asarray(self.shaped_fitness, dtype=np.float64)

    @property
    def size(self) -> int:
        return len(self.handles)


def shape_fitness(raw_returns: np.ndarray, kind: str) -> np.ndarray:
    """Map raw returns to the fitness values the estimator consumes.

    centered_rank: stable sort (ties keep original order), ranks placed
    on a uniform grid over [-0.5, 0.5].  raw: identity copy.
    """
    raw_returns = np.asarray(raw_returns, dtype=np.float64)
    if kind == "raw":
        return raw_returns.copy()
    if kind != "centered_rank":
        raise ValueError(f"unknown fitness shaping kind {kind!r}")
    n = raw_returns.size
    if n == 1:
        return np.zeros(1)
    order = np.argsort(raw_returns, kind="stable")
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.arange(n, dtype=np.float64)
    return ranks / (n - 1) - 0.5


def estimate_gradient_vanilla(
    batch: BatchRecord, table: NoiseTable, sigma: float
) -> np.ndarray:
    """Average of fitness-weighted perturbations, 1/(n sigma) scaled.

    Equivalent to mean(F_i * eps_i) / sigma^2 with eps_i = sigma * sign
    * window, but only touches the unscaled windows.  Accumulation runs
    in handle index order so results are reproducible bit for bit.
    """
    dim = batch.base_params.size
    n = batch.size
    acc = np.zeros(dim)
    for f, h in zip(batch.shaped_fitness, batch.handles):
        acc += (float(f) * h.sign) * perturbation_window(table, h, dim)
    return acc / (n * sigma)


def apply_update(
    theta: np.ndarray,
    grad: np.ndarray,
    state: OptimizerState,
    config: PopulationConfig,
) -> np.ndarray:
    """One ascent step; mutates state, returns the new parameters.

    Adam is the standard bias-corrected variant.  The optional L2 term
    is applied as a separate -lr * l2 * theta pull for both optimizers.
    """
    state.step_count += 1
    lr = config.learning_rate
    if config.optimizer == "sgd":
        step = lr * grad
    else:
        t = state.step_count
        state.m = config.adam_beta1 * state.m + (1.0 - config.adam_beta1) * grad
        state.v = config.adam_beta2 * state.v + (1.0 - config.adam_beta2) * grad * grad
        m_hat = state.m / (1.0 - config.adam_beta1**t)
        v_hat = state.v / (1.0 - config.adam_beta2**t)
        step = lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    new_theta = theta + step
    if config.l2_coeff:
        new_theta = new_theta - lr * config.l2_coeff * theta
    return new_theta
