"""Shared noise table and perturbation handles.

All perturbations used by the optimizer are contiguous windows into one
large block of standard normal values, generated once from a seed.  A
perturbation is therefore described by an (offset, sign) pair instead of
a dim-sized vector, which keeps batches cheap to store and to ship
between workers.  Prefix sums of squares are precomputed so the squared
norm of any window costs O(1) instead of O(dim).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "NoiseTable",
    "PerturbationHandle",
    "build_noise_table",
    "get_noise_table",
    "sample_handles",
    "perturbation_window",
    "perturbation_sq_norm",
]


@dataclass(frozen=True, eq=False)
class NoiseTable:
    """One seeded block of N(0, 1) draws plus prefix sums of squares.

    values:    float64, length L, from numpy's PCG64 bit generator via
               Generator.standard_normal (documented, stable algorithm).
    sq_prefix: length L + 1 with sq_prefix[0] = 0 and
               sq_prefix[m] = sum(values[:m] ** 2), accumulated in
               extended precision so window differences stay accurate
               far beyond the 1e-9 relative contract.
    """

    seed: int
    values: np.ndarray
    sq_prefix: np.ndarray

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class PerturbationHandle:
    """A perturbation: sign * values[offset : offset + dim], scaled later."""

    offset: int
    sign: int


def build_noise_table(seed: int, length: int) -> NoiseTable:
    """Generate the table. PRNG: numpy PCG64, Generator.standard_normal."""
    if length < 1:
        raise ValueError(f"table length must be >= 1, got {length}")
    rng = np.random.Generator(np.random.PCG64(seed))
    values = rng.standard_normal(length)
    values.flags.writeable = False
    # longdouble keeps the running sum accurate enough that any window
    # difference is far inside 1e-9 relative of the direct summation
    sq_prefix = np.empty(length + 1, dtype=np.longdouble)
    sq_prefix[0] = 0.0
    np.cumsum(np.square(values, dtype=np.longdouble), out=sq_prefix[1:])
    sq_prefix.flags.writeable = False
    return NoiseTable(seed=seed, values=values, sq_prefix=sq_prefix)


@lru_cache(maxsize=4)
def get_noise_table(seed: int, length: int) -> NoiseTable:
    """Cached build_noise_table; tables are immutable so sharing is safe."""
    return build_noise_table(seed, length)


def sample_handles(
    rng: np.random.Generator,
    table: NoiseTable,
    n_pairs: int,
    dim: int,
    mirrored: bool = True,
) -> list[PerturbationHandle]:
    """Draw perturbation handles with offsets uniform over [0, L - dim].

    Mirrored sampling emits 2 * n_pairs handles where each consecutive
    pair shares an offset with signs +1 and -1.  With mirrored=False,
    n_pairs is taken as the number of single handles, all sign +1.
    Overlapping windows across a batch are allowed by design.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if dim > len(table):
        raise ValueError(f"dim {dim} exceeds table length {len(table)}")
    high = len(table) - dim + 1
    offsets = rng.integers(0, high, size=n_pairs)
    handles: list[PerturbationHandle] = []
    for off in offsets:
        offset = int(off)
        handles.append(PerturbationHandle(offset=offset, sign=1))
        if mirrored:
            handles.append(PerturbationHandle(offset=offset, sign=-1))
    return handles


def perturbation_window(
    table: NoiseTable, handle: PerturbationHandle, dim: int
) -> np.ndarray:
    """Unsigned view of the handle's noise window (no copy)."""
    return table.values[handle.offset : handle.offset + dim]


def perturbation_sq_norm(
    table: NoiseTable, handle: PerturbationHandle, dim: int
) -> float:
    """O(1) squared norm of the unsigned window via the prefix sums."""
    return float(table.sq_prefix[handle.offset + dim] - table.sq_prefix[handle.offset])
