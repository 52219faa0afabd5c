"""Training runs, sweeps over one axis, and throughput benchmarks.

train() drives the full loop per seed: sample a batch of perturbation
handles, evaluate them through the worker pool, shape the returns, apply
the plain update plus up to K reuse updates, evaluate the policy, and
log one CSV row per update.  sweep() repeats train() across values of
one axis and writes a steps-to-threshold summary.  bench_throughput()
times bare training iterations (no evaluation rollouts) to compare the
cost of reuse settings.
"""

import csv
import logging
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .config import (
    ConfigError,
    RunConfig,
    config_as_dict,
    make_iw_config,
    make_objective,
    make_population_config,
)
from .core import BatchRecord, OptimizerState, shape_fitness
from .importance import run_batch_updates
from .noise import get_noise_table, sample_handles
from .objectives import evaluate_policy_median
from .persistence import (
    IterationLog,
    RunCsvWriter,
    read_run_csv,
    save_params,
    write_aggregate,
    write_config_echo,
)
from .pool import WorkerPool, derive_episode_seed, evaluate_batch

__all__ = [
    "RunArtifacts",
    "initial_params",
    "SweepResult",
    "train",
    "sweep",
    "bench_throughput",
    "steps_to_threshold",
    "threshold_from_medians",
    "SWEEP_AXES",
]

logger = logging.getLogger(__name__)

SWEEP_AXES = {"K": "K", "hidden": "hidden", "lr": "learning_rate", "sigma": "sigma"}

# stream tags keeping a seed's init, offset, training, and evaluation
# randomness independent of each other
STREAM_OFFSETS = 101
STREAM_TRAIN = 202
STREAM_EVAL = 303
STREAM_INIT = 404


def initial_params(seed: int, dim: int, scale: float) -> np.ndarray:
    """Seeded random starting parameters, or zeros when scale is 0."""
    if scale == 0.0:
        return np.zeros(dim)
    rng = np.random.Generator(np.random.PCG64(derive_episode_seed(seed, STREAM_INIT)))
    return scale * rng.standard_normal(dim)


@dataclass(frozen=True)
class RunArtifacts:
    out_dir: str
    config_path: str
    run_csvs: dict
    aggregate_csv: str
    summary_csv: str
    params_path: str


@dataclass(frozen=True)
class SweepResult:
    out_dir: str
    summary_csv: str
    value_dirs: dict


def _train_one_seed(cfg, seed, objective, table, pool, csv_path, trajectory_hook=None):
    """One seed's full run; returns (final params, last median, medians)."""
    dim = objective.dim
    pop = make_population_config(cfg)
    iw = make_iw_config(cfg)
    offsets_rng = np.random.Generator(
        np.random.PCG64(derive_episode_seed(seed, STREAM_OFFSETS))
    )
    train_base = derive_episode_seed(seed, STREAM_TRAIN)
    # evaluation episodes are fixed per run (not per iteration) so the
    # learning curve is directly comparable across iterations and runs
    eval_base = derive_episode_seed(seed, STREAM_EVAL)

    theta = initial_params(seed, dim, cfg.init_scale)
    state = OptimizerState.initial(dim)
    train_cum = 0
    eval_cum = 0
    last_median = 0.0
    t0 = time.perf_counter()
    with RunCsvWriter(csv_path) as writer:
        for it in range(1, cfg.iterations + 1):
            handles = sample_handles(
                offsets_rng, table, cfg.batch_pairs, dim, cfg.mirrored
            )
            raw, steps = evaluate_batch(
                pool, theta, handles, objective, table, cfg.sigma,
                seed_base=derive_episode_seed(train_base, it),
            )
            shaped = shape_fitness(raw, cfg.fitness_shaping)
            batch = BatchRecord(
                base_params=theta,
                handles=handles,
                raw_returns=raw,
                shaped_fitness=shaped,
                env_steps=steps,
            )
            theta, diags = run_batch_updates(theta, batch, iw, pop, state, table, pool)
            train_cum += steps
            if it == 1 or it == cfg.iterations or it % cfg.log_every == 0:
                last_median, eval_steps = evaluate_policy_median(
                    objective, theta, cfg.n_eval, eval_base
                )
                eval_cum += eval_steps
            if trajectory_hook is not None:
                trajectory_hook(seed, it, theta)
            wall_ms = (time.perf_counter() - t0) * 1000.0
            for d in diags:
                writer.write_row(
                    IterationLog(
                        iteration=it,
                        update_index=d.update_index,
                        train_env_steps_cum=train_cum,
                        eval_env_steps_cum=eval_cum,
                        wall_ms_cum=wall_ms,
                        median_eval_return=last_median,
                        ess=d.ess,
                        clip_fraction=d.clip_fraction,
                        grad_norm=d.grad_norm,
                        weight_sum=d.weight_sum,
                        skipped=d.skipped,
                    )
                )
    return theta


def _per_iteration_curve(cols):
    """(train steps, median return) per iteration: the update-0 rows."""
    mask = cols["update_index"] == 0
    return cols["train_env_steps_cum"][mask], cols["median_eval_return"][mask]


def steps_to_threshold(steps, medians, threshold):
    """Env steps at the first median >= threshold, or None if never."""
    hits = np.nonzero(medians >= threshold)[0]
    if hits.size == 0:
        return None
    return int(steps[hits[0]])


def threshold_from_medians(medians, fraction):
    """First-logged-point + fraction of the curve's total improvement.

    Works for negative returns, where a plain fraction of the best value
    would sit above the best and never be crossed.
    """
    initial = float(medians[0])
    best = float(np.max(medians))
    return initial + fraction * (best - initial)


def _resolve_threshold(cfg, baseline_aggregate_csv):
    if cfg.threshold is not None:
        return float(cfg.threshold)
    cols = read_run_csv(baseline_aggregate_csv)
    _, medians = _per_iteration_curve(cols)
    if medians.size == 0:
        return None
    return threshold_from_medians(medians, cfg.threshold_fraction)


_SUMMARY_FIELDS = (
    "axis",
    "value",
    "threshold",
    "agg_steps_to_threshold",
    "mean_steps_to_threshold",
    "seeds_reached",
    "n_seeds",
    "final_median_mean",
    "best_median_mean",
)


def _summarize_value(axis, value, threshold, run_csvs, aggregate_csv):
    """One summary row; censored runs count their full step budget."""
    finals = []
    bests = []
    per_seed_steps = []
    reached = 0
    for path in run_csvs.values():
        cols = read_run_csv(path)
        steps, medians = _per_iteration_curve(cols)
        if medians.size == 0:
            continue
        finals.append(float(medians[-1]))
        bests.append(float(np.max(medians)))
        hit = steps_to_threshold(steps, medians, threshold)
        if hit is None:
            per_seed_steps.append(int(steps[-1]))
        else:
            per_seed_steps.append(hit)
            reached += 1
    agg_cols = read_run_csv(aggregate_csv)
    agg_steps, agg_medians = _per_iteration_curve(agg_cols)
    agg_hit = steps_to_threshold(agg_steps, agg_medians, threshold)
    if agg_hit is None and agg_steps.size:
        agg_hit = int(agg_steps[-1])
    return {
        "axis": axis,
        "value": value,
        "threshold": threshold,
        "agg_steps_to_threshold": agg_hit if agg_hit is not None else 0,
        "mean_steps_to_threshold": (
            float(np.mean(per_seed_steps)) if per_seed_steps else 0.0
        ),
        "seeds_reached": reached,
        "n_seeds": len(run_csvs),
        "final_median_mean": float(np.mean(finals)) if finals else 0.0,
        "best_median_mean": float(np.mean(bests)) if bests else 0.0,
    }


def _write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SUMMARY_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def train(cfg: RunConfig, trajectory_hook=None) -> RunArtifacts:
    """Run every seed in cfg, write artifacts, return their paths.

    Artifacts: config.echo.json, run_<seed>.csv per seed, aggregate.csv
    (mean over seeds at matched rows), summary.csv, and params_final.bin
    holding the final parameters of the seed with the best final median.
    trajectory_hook(seed, iteration, theta), if given, observes the
    parameters after each iteration's updates.
    """
    cfg.validate()
    objective = make_objective(cfg)
    if cfg.noise_table_len < objective.dim:
        raise ConfigError(
            f"noise_table_len {cfg.noise_table_len} is smaller than the "
            f"parameter dimension {objective.dim}"
        )
    os.makedirs(cfg.out_dir, exist_ok=True)
    config_path = os.path.join(cfg.out_dir, "config.echo.json")
    write_config_echo(config_path, config_as_dict(cfg))
    table = get_noise_table(cfg.noise_seed, cfg.noise_table_len)

    run_csvs = {}
    finals = {}
    with WorkerPool(cfg.workers) as pool:
        for seed in cfg.seeds:
            csv_path = os.path.join(cfg.out_dir, f"run_{seed}.csv")
            logger.info("training seed %d -> %s", seed, csv_path)
            finals[seed] = _train_one_seed(
                cfg, seed, objective, table, pool, csv_path, trajectory_hook
            )
            run_csvs[seed] = csv_path

    aggregate_csv = os.path.join(cfg.out_dir, "aggregate.csv")
    write_aggregate(list(run_csvs.values()), aggregate_csv)

    summary_csv = os.path.join(cfg.out_dir, "summary.csv")
    threshold = _resolve_threshold(cfg, aggregate_csv)
    rows = []
    if threshold is not None:
        rows.append(_summarize_value("train", 0, threshold, run_csvs, aggregate_csv))
    _write_summary(summary_csv, rows)

    params_path = os.path.join(cfg.out_dir, "params_final.bin")
    best_seed = _best_final_seed(run_csvs, cfg.seeds)
    save_params(params_path, finals[best_seed])
    return RunArtifacts(
        out_dir=cfg.out_dir,
        config_path=config_path,
        run_csvs=run_csvs,
        aggregate_csv=aggregate_csv,
        summary_csv=summary_csv,
        params_path=params_path,
    )


def _best_final_seed(run_csvs, seeds):
    best_seed = seeds[0]
    best_median = -np.inf
    for seed in seeds:
        cols = read_run_csv(run_csvs[seed])
        _, medians = _per_iteration_curve(cols)
        if medians.size and float(medians[-1]) > best_median:
            best_median = float(medians[-1])
            best_seed = seed
    return best_seed


def sweep(cfg: RunConfig, axis: str, values) -> SweepResult:
    """Train once per value of one axis and summarize side by side.

    The steps-to-threshold target is shared across values: it comes
    from the baseline value's aggregate curve (the K=0 run when sweeping
    K, otherwise the first value), or from cfg.threshold when set.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; have {sorted(SWEEP_AXES)}")
    if not values:
        raise ValueError("sweep needs at least one value")
    field_name = SWEEP_AXES[axis]
    field_type = int if field_name in ("K", "hidden") else float
    values = [field_type(v) for v in values]

    os.makedirs(cfg.out_dir, exist_ok=True)
    write_config_echo(
        os.path.join(cfg.out_dir, "config.echo.json"), config_as_dict(cfg)
    )
    artifacts = {}
    value_dirs = {}
    for value in values:
        sub_dir = os.path.join(cfg.out_dir, f"{axis}_{value}")
        sub_cfg = replace(cfg, out_dir=sub_dir, **{field_name: value})
        logger.info("sweep %s=%s -> %s", axis, value, sub_dir)
        artifacts[value] = train(sub_cfg)
        value_dirs[value] = sub_dir

    baseline = 0 if (axis == "K" and 0 in values) else values[0]
    threshold = _resolve_threshold(cfg, artifacts[baseline].aggregate_csv)
    rows = []
    if threshold is not None:
        for value in values:
            rows.append(
                _summarize_value(
                    axis,
                    value,
                    threshold,
                    artifacts[value].run_csvs,
                    artifacts[value].aggregate_csv,
                )
            )
    summary_csv = os.path.join(cfg.out_dir, "summary.csv")
    _write_summary(summary_csv, rows)
    return SweepResult(
        out_dir=cfg.out_dir, summary_csv=summary_csv, value_dirs=value_dirs
    )


def bench_throughput(
    cfg: RunConfig,
    k_values,
    hidden_values,
    timed_iters: int = 20,
    warmup: int = 2,
    out_path=None,
):
    """Median wall time per training iteration for each (hidden, K).

    Evaluation rollouts are excluded so the numbers isolate batch
    collection plus updates.  Ratios are against the same width's K=0
    time; K=0 is added to k_values if missing.  Returns a list of row
    dicts and optionally writes them as CSV.
    """
    cfg.validate()
    ks = sorted(set(int(k) for k in k_values) | {0})
    rows = []
    for hidden in hidden_values:
        base_ms = None
        for k in ks:
            sub_cfg = replace(cfg, hidden=int(hidden), K=k)
            times = _bench_iteration_times(sub_cfg, warmup + timed_iters)
            median_ms = float(np.median(np.asarray(times[warmup:]) * 1000.0))
            if k == 0:
                base_ms = median_ms
            rows.append(
                {
                    "hidden": int(hidden),
                    "K": k,
                    "median_iter_ms": median_ms,
                    "ratio_vs_k0": median_ms / base_ms,
                }
            )
            logger.info(
                "bench hidden=%d K=%d: %.2f ms/iter", int(hidden), k, median_ms
            )
    if out_path:
        with open(out_path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=("hidden", "K", "median_iter_ms", "ratio_vs_k0")
            )
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    return rows


def _bench_iteration_times(cfg: RunConfig, n_iters: int):
    """Per-iteration wall seconds for a bare training loop."""
    objective = make_objective(cfg)
    if cfg.noise_table_len < objective.dim:
        raise ConfigError(
            f"noise_table_len {cfg.noise_table_len} is smaller than the "
            f"parameter dimension {objective.dim}"
        )
    table = get_noise_table(cfg.noise_seed, cfg.noise_table_len)
    pop = make_population_config(cfg)
    iw = make_iw_config(cfg)
    seed = cfg.seeds[0]
    dim = objective.dim
    offsets_rng = np.random.Generator(
        np.random.PCG64(derive_episode_seed(seed, STREAM_OFFSETS))
    )
    train_base = derive_episode_seed(seed, STREAM_TRAIN)
    theta = initial_params(seed, dim, cfg.init_scale)
    state = OptimizerState.initial(dim)
    times = []
    with WorkerPool(cfg.workers) as pool:
        for it in range(1, n_iters + 1):
            t0 = time.perf_counter()
            handles = sample_handles(
                offsets_rng, table, cfg.batch_pairs, dim, cfg.mirrored
            )
            raw, steps = evaluate_batch(
                pool, theta, handles, objective, table, cfg.sigma,
                seed_base=derive_episode_seed(train_base, it),
            )
            shaped = shape_fitness(raw, cfg.fitness_shaping)
            batch = BatchRecord(
                base_params=theta,
                handles=handles,
                raw_returns=raw,
                shaped_fitness=shaped,
                env_steps=steps,
            )
            theta, _ = run_batch_updates(theta, batch, iw, pop, state, table, pool)
            times.append(time.perf_counter() - t0)
    return times
