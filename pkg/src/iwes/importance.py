"""Importance-weighted reuse of evaluation batches.

After the plain update from a fresh batch, the same evaluations can
drive further updates: each perturbed point is reweighted by the ratio
of its density under the current parameters to its density under the
parameters it was sampled at.  Both densities are isotropic Gaussians
with the same sigma, so the ratio collapses to a difference of squared
norms and the denominator norm comes from the noise table's prefix sums
in O(1).  Raw ratios are clipped at 1 to control variance; effective
sample size and the clipped fraction are reported for every update.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    BatchRecord,
    OptimizerState,
    PopulationConfig,
    apply_update,
    estimate_gradient_vanilla,
)
from .noise import (
    NoiseTable,
    PerturbationHandle,
    perturbation_sq_norm,
    perturbation_window,
)
from .pool import WorkerPool, parallel_map_weights

__all__ = [
    "DegenerateBatchError",
    "IWConfig",
    "ImportanceWeights",
    "UpdateDiag",
    "compute_log_weight",
    "compute_weights",
    "effective_sample_size",
    "estimate_gradient_iw",
    "run_batch_updates",
]

logger = logging.getLogger(__name__)


class DegenerateBatchError(RuntimeError):
    """Every weight underflowed; the batch cannot support a reuse update."""


@dataclass(frozen=True)
class IWConfig:
    """Batch reuse settings.

    K:                  reuse updates per batch on top of the plain one.
    ess_min_fraction:   stop reusing a batch once the effective sample
                        size drops below this fraction of the batch
                        size; 0 disables the guard.
    weight_sum_min:     per-sample floor; a reuse update is refused when
                        the clipped weight sum falls below
                        weight_sum_min * batch size.
    iw_uses_raw_returns: weight raw returns instead of shaped fitness in
                        reuse updates.
    reset_adam_per_batch: clear optimizer moments at each batch start.
    """

    K: int = 0
    ess_min_fraction: float = 0.0
    weight_sum_min: float = 1e-8
    iw_uses_raw_returns: bool = False
    reset_adam_per_batch: bool = False

    def __post_init__(self) -> None:
        if self.K < 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if not 0.0 <= self.ess_min_fraction <= 1.0:
            raise ValueError(
                f"ess_min_fraction must be in [0, 1], got {self.ess_min_fraction}"
            )
        if not self.weight_sum_min > 0:
            raise ValueError(
                f"weight_sum_min must be > 0, got {self.weight_sum_min}"
            )


@dataclass(frozen=True)
class ImportanceWeights:
    """Weights for one batch against one parameter vector.

    log_weights holds the raw (pre-clip) log ratios; weights holds the
    clipped linear ratios min(1, exp(log_weight)).
    """

    log_weights: np.ndarray
    weights: np.ndarray
    ess: float
    clip_fraction: float

    @property
    def weight_sum(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class UpdateDiag:
    """Diagnostics for one update within a batch (index 0 = plain)."""

    update_index: int
    ess: float
    clip_fraction: float
    grad_norm: float
    weight_sum: float
    skipped: bool


def compute_log_weight(
    table: NoiseTable,
    handle: PerturbationHandle,
    dim: int,
    theta_t: np.ndarray,
    theta_now: np.ndarray,
    sigma: float,
) -> float:
    """Log density ratio of one perturbation, new params over old.

    log c = (|eps|^2 - |eps - delta|^2) / (2 sigma^2) with
    delta = theta_now - theta_t; the Gaussian normalizers cancel because
    both densities share sigma.  |eps|^2 comes from the prefix sums.
    When delta is exactly zero the ratio is exactly 1 (log 0), short of
    any floating-point noise.
    """
    delta = theta_now - theta_t
    if not delta.any():
        return 0.0
    signed = (sigma * handle.sign) * perturbation_window(table, handle, dim)
    diff = signed - delta
    sq_shifted = float(diff @ diff)
    sq_eps = sigma * sigma * perturbation_sq_norm(table, handle, dim)
    return (sq_eps - sq_shifted) / (2.0 * sigma * sigma)


def compute_weights(
    batch: BatchRecord,
    theta_now: np.ndarray,
    sigma: float,
    table: NoiseTable,
    pool: WorkerPool,
) -> ImportanceWeights:
    """Clipped importance weights of a batch against theta_now.

    Weights are always computed against the batch's own base parameters,
    never chained through intermediate updates.  The per-handle work is
    spread over the pool; results do not depend on the pool size.
    Non-finite log ratios are zeroed with a logged warning; if every
    weight is numerically zero the batch is degenerate.
    """
    dim = batch.base_params.size

    def weight_fn(i: int) -> float:
        return compute_log_weight(
            table, batch.handles[i], dim, batch.base_params, theta_now, sigma
        )

    log_w = parallel_map_weights(pool, batch.size, weight_fn)
    finite = np.isfinite(log_w)
    if not finite.all():
        logger.warning(
            "%d of %d log weights non-finite; treating them as zero weight",
            int(batch.size - finite.sum()),
            batch.size,
        )
    # clip at 1 in linear space == clamp log at 0; also avoids overflow
    weights = np.where(finite, np.exp(np.minimum(log_w, 0.0)), 0.0)
    if not weights.any():
        raise DegenerateBatchError(
            f"all {batch.size} importance weights are numerically zero"
        )
    clip_fraction = float(np.mean(finite & (log_w > 0.0)))
    return ImportanceWeights(
        log_weights=log_w,
        weights=weights,
        ess=effective_sample_size(weights),
        clip_fraction=clip_fraction,
    )


def effective_sample_size(weights: np.ndarray) -> float:
    """(sum w)^2 / sum(w^2); raises if the weights carry no mass."""
    total = float(np.sum(weights))
    total_sq = float(np.sum(np.square(weights)))
    if total_sq == 0.0:
        raise DegenerateBatchError("effective sample size of all-zero weights")
    return total * total / total_sq


def estimate_gradient_iw(
    batch: BatchRecord,
    iw: ImportanceWeights,
    theta_now: np.ndarray,
    sigma: float,
    table: NoiseTable,
    fitness: np.ndarray | None = None,
    weight_sum_floor: float = 0.0,
) -> np.ndarray:
    """Self-normalized reuse gradient at theta_now from an old batch.

    grad = sum_i F_i * c_i * (theta_t + eps_i - theta_now)
           / (sigma^2 * sum_i c_i)

    fitness defaults to the batch's shaped fitness.  Accumulation runs
    in handle index order.
    """
    weights = iw.weights
    sum_w = float(np.sum(weights))
    if not sum_w > weight_sum_floor:
        raise DegenerateBatchError(
            f"weight sum {sum_w} at or below floor {weight_sum_floor}"
        )
    if fitness is None:
        fitness = batch.shaped_fitness
    dim = batch.base_params.size
    shift = batch.base_params - theta_now
    acc = np.zeros(dim)
    for f, c, h in zip(fitness, weights, batch.handles):
        acc += (float(f) * float(c)) * (
            shift + (sigma * h.sign) * perturbation_window(table, h, dim)
        )
    return acc / (sigma * sigma * sum_w)


def run_batch_updates(
    theta: np.ndarray,
    batch: BatchRecord,
    iw_cfg: IWConfig,
    pop_cfg: PopulationConfig,
    opt_state: OptimizerState,
    table: NoiseTable,
    pool: WorkerPool,
) -> tuple[np.ndarray, list[UpdateDiag]]:
    """Apply the plain update plus up to K reuse updates from one batch.

    Update 0 always takes the plain estimator path, so K=0 runs are
    bit-identical to a loop that never touches the reuse machinery.
    Reuse stops early on a degenerate batch or when the ESS guard (if
    enabled) trips; the skipped update is recorded and the rest of the
    batch is abandoned.  Returns the final parameters and one diagnostic
    row per attempted update.
    """
    n = batch.size
    if iw_cfg.reset_adam_per_batch:
        opt_state.reset()
    diags: list[UpdateDiag] = []

    grad = estimate_gradient_vanilla(batch, table, pop_cfg.sigma)
    theta = apply_update(theta, grad, opt_state, pop_cfg)
    diags.append(
        UpdateDiag(
            update_index=0,
            ess=float(n),
            clip_fraction=0.0,
            grad_norm=float(np.linalg.norm(grad)),
            weight_sum=float(n),
            skipped=False,
        )
    )

    fitness = batch.raw_returns if iw_cfg.iw_uses_raw_returns else batch.shaped_fitness
    floor = iw_cfg.weight_sum_min * n
    for k in range(1, iw_cfg.K + 1):
        try:
            iw = compute_weights(batch, theta, pop_cfg.sigma, table, pool)
        except DegenerateBatchError:
            logger.warning("batch degenerate at reuse update %d; abandoning batch", k)
            diags.append(UpdateDiag(k, 0.0, 0.0, 0.0, 0.0, True))
            break
        if iw_cfg.ess_min_fraction > 0.0 and iw.ess < iw_cfg.ess_min_fraction * n:
            diags.append(
                UpdateDiag(k, iw.ess, iw.clip_fraction, 0.0, iw.weight_sum, True)
            )
            break
        try:
            grad = estimate_gradient_iw(
                batch, iw, theta, pop_cfg.sigma, table,
                fitness=fitness, weight_sum_floor=floor,
            )
        except DegenerateBatchError:
            logger.warning("weight sum under floor at reuse update %d", k)
            diags.append(
                UpdateDiag(k, iw.ess, iw.clip_fraction, 0.0, iw.weight_sum, True)
            )
            break
        theta = apply_update(theta, grad, opt_state, pop_cfg)
        diags.append(
            UpdateDiag(
                update_index=k,
                ess=iw.ess,
                clip_fraction=iw.clip_fraction,
                grad_norm=float(np.linalg.norm(grad)),
                weight_sum=iw.weight_sum,
                skipped=False,
            )
        )
    return theta, diags
