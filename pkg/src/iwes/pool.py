"""In-process worker pool with deterministic task layout.

The pool stands in for a fleet of evaluation machines: work is split
into contiguous index spans of size ceil(n / pool_size), each span runs
as one task, and results are merged back in span order.  Nothing about
the output depends on the degree of parallelism, so any run can be
reproduced with a single worker.  Threads are used because the heavy
per-task work is numpy code that releases the GIL.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .noise import NoiseTable, PerturbationHandle, perturbation_window

__all__ = [
    "TaskSpec",
    "TaskResult",
    "WorkerPool",
    "EvaluationError",
    "chunk_spans",
    "derive_episode_seed",
    "evaluate_batch",
    "parallel_map_weights",
]

logger = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


class EvaluationError(RuntimeError):
    """An objective evaluation produced a non-finite return."""


@dataclass(frozen=True)
class TaskSpec:
    """One unit of pool work: a contiguous index span of a batch."""

    kind: str  # "rollout" or "weight_chunk"
    start: int
    stop: int
    seed_base: int
    param_version: int


@dataclass(frozen=True)
class TaskResult:
    """Values for a span, in index order, plus env steps consumed."""

    spec: TaskSpec
    values: np.ndarray
    env_steps: int


def derive_episode_seed(seed_base: int, index: int) -> int:
    """64-bit episode seed from (seed_base, index) via splitmix64.

    splitmix64 finalizer on seed_base advanced by (index + 1) gammas;
    fixed constants, so seeds are stable across platforms and runs.
    """
    z = (seed_base + (index + 1) * _SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def chunk_spans(n: int, parts: int) -> list[tuple[int, int]]:
    """Contiguous spans covering range(n), chunk size ceil(n / parts)."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    size = -(-n // max(parts, 1)) if n else 0
    return [(start, min(start + size, n)) for start in range(0, n, size)] if n else []


class WorkerPool:
    """Thread-backed pool; size 0 resolves to the host's CPU count."""

    def __init__(self, size: int = 0):
        if size < 0:
            raise ValueError(f"pool size must be >= 0, got {size}")
        self.size = size if size > 0 else (os.cpu_count() or 1)
        self._executor = (
            ThreadPoolExecutor(max_workers=self.size) if self.size > 1 else None
        )
        self._param_version = 0

    def bump_param_version(self) -> int:
        """Record that the master broadcast new parameters."""
        self._param_version += 1
        return self._param_version

    @property
    def param_version(self) -> int:
        return self._param_version

    def run_tasks(self, specs: Sequence[TaskSpec], task_fn) -> list[TaskResult]:
        """Run one task per spec; results come back in spec order."""
        if self._executor is None:
            return [task_fn(spec) for spec in specs]
        return list(self._executor.map(task_fn, specs))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def evaluate_batch(
    pool: WorkerPool,
    theta: np.ndarray,
    handles: Sequence[PerturbationHandle],
    objective,
    table: NoiseTable,
    sigma: float,
    seed_base: int,
) -> tuple[np.ndarray, int]:
    """Evaluate the objective at every perturbation of theta.

    Returns (raw_returns, total_env_steps).  raw_returns[i] is the
    objective at theta + sigma * sign_i * window_i.  Every member of the
    batch runs under the same episode seed,
    derive_episode_seed(seed_base, 0): with common episode conditions
    the returns of different perturbations are directly comparable, so
    rank shaping measures policy differences instead of episode luck.
    Callers vary seed_base across batches.  Results are placed by index,
    so they are identical for every pool size.
    """
    dim = int(np.asarray(theta).size)
    n = len(handles)
    version = pool.bump_param_version()
    episode_seed = derive_episode_seed(seed_base, 0)
    out = np.empty(n, dtype=np.float64)

    def run(spec: TaskSpec) -> TaskResult:
        values = np.empty(spec.stop - spec.start, dtype=np.float64)
        task_steps = 0
        for i in range(spec.start, spec.stop):
            h = handles[i]
            params = theta + (sigma * h.sign) * perturbation_window(table, h, dim)
            ret, ep_steps = objective.evaluate(params, episode_seed)
            if not np.isfinite(ret):
                raise EvaluationError(
                    f"non-finite return {ret!r} at batch index {i} "
                    f"(offset={h.offset}, sign={h.sign}, seed_base={spec.seed_base})"
                )
            values[i - spec.start] = ret
            task_steps += int(ep_steps)
        return TaskResult(spec=spec, values=values, env_steps=task_steps)

    specs = [
        TaskSpec(kind="rollout", start=a, stop=b, seed_base=seed_base, param_version=version)
        for a, b in chunk_spans(n, pool.size)
    ]
    total_steps = 0
    for result in pool.run_tasks(specs, run):
        out[result.spec.start : result.spec.stop] = result.values
        total_steps += result.env_steps
    return out, total_steps


def parallel_map_weights(
    pool: WorkerPool, n: int, weight_fn: Callable[[int], float]
) -> np.ndarray:
    """Map weight_fn over range(n) through the pool, output in index order."""
    out = np.empty(n, dtype=np.float64)

    def run(spec: TaskSpec) -> TaskResult:
        values = np.empty(spec.stop - spec.start, dtype=np.float64)
        for i in range(spec.start, spec.stop):
            values[i - spec.start] = weight_fn(i)
        return TaskResult(spec=spec, values=values, env_steps=0)

    specs = [
        TaskSpec(kind="weight_chunk", start=a, stop=b, seed_base=0,
                 param_version=pool.param_version)
        for a, b in chunk_spans(n, pool.size)
    ]
    for result in pool.run_tasks(specs, run):
        out[result.spec.start : result.spec.stop] = result.values
    return out
