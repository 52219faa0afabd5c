"""Evolution strategies with importance-weighted batch reuse.

A gradient-free optimizer that perturbs parameters with windows of a
shared noise table, estimates an ascent direction from episode returns,
and optionally reuses each evaluated batch for up to K extra updates by
importance-weighting every perturbation against the moved parameters.
"""

from .config import ConfigError, RunConfig, apply_overrides, load_config
from .core import (
    BatchRecord,
    OptimizerState,
    PopulationConfig,
    apply_update,
    estimate_gradient_vanilla,
    shape_fitness,
)
from .importance import (
    DegenerateBatchError,
    ImportanceWeights,
    IWConfig,
    UpdateDiag,
    compute_weights,
    effective_sample_size,
    estimate_gradient_iw,
    run_batch_updates,
)
from .noise import (
    NoiseTable,
    PerturbationHandle,
    build_noise_table,
    get_noise_table,
    perturbation_sq_norm,
    perturbation_window,
    sample_handles,
)
from .objectives import (
    MlpPolicy,
    PointMassEnv,
    PointMassObjective,
    evaluate_policy_median,
    make_benchmark,
    rollout,
)
from .persistence import (
    FormatError,
    IterationLog,
    RunCsvWriter,
    load_params,
    read_run_csv,
    save_params,
    write_aggregate,
)
from .pool import EvaluationError, WorkerPool, derive_episode_seed, evaluate_batch
from .runner import (
    RunArtifacts,
    SweepResult,
    bench_throughput,
    steps_to_threshold,
    sweep,
    threshold_from_medians,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BatchRecord",
    "ConfigError",
    "DegenerateBatchError",
    "EvaluationError",
    "FormatError",
    "IWConfig",
    "ImportanceWeights",
    "IterationLog",
    "MlpPolicy",
    "NoiseTable",
    "OptimizerState",
    "PerturbationHandle",
    "PointMassEnv",
    "PointMassObjective",
    "PopulationConfig",
    "RunArtifacts",
    "RunConfig",
    "RunCsvWriter",
    "SweepResult",
    "UpdateDiag",
    "WorkerPool",
    "apply_overrides",
    "apply_update",
    "bench_throughput",
    "build_noise_table",
    "compute_weights",
    "derive_episode_seed",
    "effective_sample_size",
    "estimate_gradient_iw",
    "estimate_gradient_vanilla",
    "evaluate_batch",
    "evaluate_policy_median",
    "get_noise_table",
    "load_config",
    "load_params",
    "make_benchmark",
    "perturbation_sq_norm",
    "perturbation_window",
    "read_run_csv",
    "rollout",
    "run_batch_updates",
    "sample_handles",
    "save_params",
    "shape_fitness",
    "steps_to_threshold",
    "sweep",
    "threshold_from_medians",
    "train",
    "write_aggregate",
]
