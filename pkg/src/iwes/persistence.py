"""Run logs, parameter snapshots, and cross-seed aggregation.

CSV rows are written as they are produced and flushed row by row, so a
crash leaves a readable prefix.  Real values are formatted with 17
significant digits, which round-trips float64 exactly.  Parameter files
are a fixed little-endian binary layout: 4-byte magic "IWES", uint32
version, uint64 dim, then the float64 payload.
"""

import csv
import json
import struct
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "LOG_FIELDS",
    "FormatError",
    "IterationLog",
    "RunCsvWriter",
    "read_run_csv",
    "rows_without_wall_clock",
    "save_params",
    "load_params",
    "write_aggregate",
    "write_config_echo",
]

PARAMS_MAGIC = b"IWES"
PARAMS_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


class FormatError(ValueError):
    """A persisted artifact does not match its documented layout."""


@dataclass(frozen=True)
class IterationLog:
    """One CSV row: one update of one iteration.

    update_index 0 is the plain update; 1..K are reuse updates.  The
    _cum columns accumulate over the run.  median_eval_return repeats
    the iteration's evaluation on every row of that iteration.
    """

    iteration: int
    update_index: int
    train_env_steps_cum: int
    eval_env_steps_cum: int
    wall_ms_cum: float
    median_eval_return: float
    ess: float
    clip_fraction: float
    grad_norm: float
    weight_sum: float
    skipped: bool


LOG_FIELDS = tuple(f.name for f in fields(IterationLog))
_INT_FIELDS = {"iteration", "update_index", "train_env_steps_cum", "eval_env_steps_cum"}
_WALL_INDEX = LOG_FIELDS.index("wall_ms_cum")


def _format_cell(name: str, value) -> str:
    if name == "skipped":
        return str(int(value))
    if name in _INT_FIELDS:
        return str(int(value))
    return format(float(value), ".17g")


class RunCsvWriter:
    """Append-as-you-go CSV writer for IterationLog rows."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(LOG_FIELDS)
        self._fh.flush()

    def write_row(self, row: IterationLog) -> None:
        self._writer.writerow(
            [_format_cell(name, getattr(row, name)) for name in LOG_FIELDS]
        )
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "RunCsvWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_run_csv(path) -> dict[str, np.ndarray]:
    """Read a run or aggregate CSV into typed column arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if header != list(LOG_FIELDS):
        raise FormatError(f"unexpected CSV header in {path}: {header}")
    cols: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        raw = [row[j] for row in rows]
        if name in _INT_FIELDS or name == "skipped":
            try:
                cols[name] = np.array([int(x) for x in raw], dtype=np.int64)
            except ValueError:
                # aggregates may average these columns into fractions
                cols[name] = np.array([float(x) for x in raw], dtype=np.float64)
        else:
            cols[name] = np.array([float(x) for x in raw], dtype=np.float64)
    return cols


def rows_without_wall_clock(path) -> list[tuple[str, ...]]:
    """Raw CSV rows (header included) minus the wall-clock column.

    Wall time is the one column allowed to differ between otherwise
    identical runs, so comparisons use this view.
    """
    with open(path, newline="") as fh:
        return [
            tuple(cell for j, cell in enumerate(row) if j != _WALL_INDEX)
            for row in csv.reader(fh)
        ]


def save_params(path, values: np.ndarray) -> None:
    """Write parameters as IWES v1: magic, version, dim, float64 LE."""
    values = np.ascontiguousarray(values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PARAMS_MAGIC, PARAMS_VERSION, values.size))
        fh.write(values.tobytes())


def load_params(path) -> np.ndarray:
    """Read an IWES v1 parameter file; FormatError on any mismatch."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the 16-byte header")
    magic, version, dim = _HEADER.unpack_from(blob)
    if magic != PARAMS_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != PARAMS_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    payload = blob[_HEADER.size :]
    if len(payload) != dim * 8:
        raise FormatError(
            f"{path}: expected {dim * 8} payload bytes, found {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f8").astype(np.float64, copy=True)


def write_aggregate(run_paths, out_path) -> None:
    """Mean the runs' columns at matched (iteration, update_index) rows.

    Only rows present in every run are aggregated, in the row order of
    the first run.  Cumulative step columns are means as well (they
    agree across seeds when no batch was abandoned).
    """
    runs = [read_run_csv(p) for p in run_paths]
    keyed = []
    for cols in runs:
        keys = list(zip(cols["iteration"].tolist(), cols["update_index"].tolist()))
        keyed.append({k: i for i, k in enumerate(keys)})
    first_keys = list(
        zip(runs[0]["iteration"].tolist(), runs[0]["update_index"].tolist())
    )
    shared = [k for k in first_keys if all(k in m for m in keyed)]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_FIELDS)
        for key in shared:
            row = []
            for name in LOG_FIELDS:
                values = [
                    float(cols[name][keyed[r][key]]) for r, cols in enumerate(runs)
                ]
                mean = sum(values) / len(values)
                if name in ("iteration", "update_index"):
                    row.append(str(int(mean)))
                elif name in _INT_FIELDS or name == "skipped":
                    # may be fractional after averaging; keep full precision
                    row.append(
                        str(int(mean)) if mean == int(mean) else format(mean, ".17g")
                    )
                else:
                    row.append(format(mean, ".17g"))
            writer.writerow(row)


def write_config_echo(path, config_dict: dict) -> None:
    with open(path, "w") as fh:
        json.dump(config_dict, fh, indent=2, sort_keys=True)
        fh.write("\n")
