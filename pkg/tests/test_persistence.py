"""Tests for run logs, parameter files, and aggregation."""

import csv

import numpy as np
import pytest

from iwes.persistence import (
    LOG_FIELDS,
    FormatError,
    IterationLog,
    RunCsvWriter,
    load_params,
    read_run_csv,
    rows_without_wall_clock,
    save_params,
    write_aggregate,
    write_config_echo,
)


def _row(iteration=1, update_index=0, median=-1.5, **overrides):
    base = dict(
        iteration=iteration,
        update_index=update_index,
        train_env_steps_cum=1000 * iteration,
        eval_env_steps_cum=300 * iteration,
        wall_ms_cum=12.5 * iteration,
        median_eval_return=median,
        ess=12.0,
        clip_fraction=0.25,
        grad_norm=0.125,
        weight_sum=11.5,
        skipped=False,
    )
    base.update(overrides)
    return IterationLog(**base)


def test_header_matches_field_list_exactly(tmp_path) -> None:
    path = tmp_path / "run.csv"
    with RunCsvWriter(path) as writer:
        writer.write_row(_row())
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    assert header == list(LOG_FIELDS)
    assert header == [
        "iteration",
        "update_index",
        "train_env_steps_cum",
        "eval_env_steps_cum",
        "wall_ms_cum",
        "median_eval_return",
        "ess",
        "clip_fraction",
        "grad_norm",
        "weight_sum",
        "skipped",
    ]


def test_real_columns_round_trip_exactly(tmp_path) -> None:
    path = tmp_path / "run.csv"
    gnarly = [0.1, -1.0 / 3.0, 1e-300, 2.5e17, -7.000000000000001e-5]
    with RunCsvWriter(path) as writer:
        for i, x in enumerate(gnarly, start=1):
            writer.write_row(_row(iteration=i, median=x, ess=x * 2.0, grad_norm=abs(x)))
    cols = read_run_csv(path)
    assert cols["median_eval_return"].tolist() == gnarly
    assert cols["ess"].tolist() == [x * 2.0 for x in gnarly]
    assert cols["iteration"].dtype.kind == "i"
    assert cols["skipped"].tolist() == [0] * 5


def test_rows_are_flushed_as_written(tmp_path) -> None:
    path = tmp_path / "run.csv"
    writer = RunCsvWriter(path)
    writer.write_row(_row(iteration=1))
    writer.write_row(_row(iteration=2))
    # file must already be a valid prefix before close
    cols = read_run_csv(path)
    assert cols["iteration"].tolist() == [1, 2]
    writer.close()


def test_skipped_column_is_integer_coded(tmp_path) -> None:
    path = tmp_path / "run.csv"
    with RunCsvWriter(path) as writer:
        writer.write_row(_row(iteration=1, skipped=True))
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[1][-1] == "1"


def test_rows_without_wall_clock_strips_only_that_column(tmp_path) -> None:
    path = tmp_path / "run.csv"
    with RunCsvWriter(path) as writer:
        writer.write_row(_row(iteration=1))
    rows = rows_without_wall_clock(path)
    assert len(rows) == 2
    assert "wall_ms_cum" not in rows[0]
    assert len(rows[0]) == len(LOG_FIELDS) - 1


def test_params_file_round_trips_bit_exactly(tmp_path) -> None:
    path = tmp_path / "params_final.bin"
    rng = np.random.Generator(np.random.PCG64(3))
    values = rng.standard_normal(1234)
    values[0] = 0.1
    values[1] = np.nextafter(1.0, 2.0)
    save_params(path, values)
    loaded = load_params(path)
    assert np.array_equal(loaded, values)
    assert loaded.dtype == np.float64


def test_params_file_header_layout(tmp_path) -> None:
    path = tmp_path / "p.bin"
    save_params(path, np.array([1.0, 2.0, 3.0]))
    blob = path.read_bytes()
    assert blob[:4] == b"IWES"
    assert int.from_bytes(blob[4:8], "little") == 1
    assert int.from_bytes(blob[8:16], "little") == 3
    assert len(blob) == 16 + 3 * 8


def test_load_params_rejects_bad_magic_and_truncation(tmp_path) -> None:
    path = tmp_path / "p.bin"
    save_params(path, np.array([1.0, 2.0]))
    blob = path.read_bytes()
    bad_magic = tmp_path / "bad_magic.bin"
    bad_magic.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        load_params(bad_magic)
    truncated = tmp_path / "trunc.bin"
    truncated.write_bytes(blob[:-4])
    with pytest.raises(FormatError):
        load_params(truncated)
    bad_version = tmp_path / "ver.bin"
    bad_version.write_bytes(blob[:4] + (9).to_bytes(4, "little") + blob[8:])
    with pytest.raises(FormatError):
        load_params(bad_version)
    short = tmp_path / "short.bin"
    short.write_bytes(b"IWES")
    with pytest.raises(FormatError):
        load_params(short)


def test_aggregate_is_exact_mean_over_matched_rows(tmp_path) -> None:
    run_a = tmp_path / "run_1.csv"
    run_b = tmp_path / "run_2.csv"
    with RunCsvWriter(run_a) as writer:
        writer.write_row(_row(iteration=1, update_index=0, median=-4.0, ess=10.0))
        writer.write_row(_row(iteration=1, update_index=1, median=-4.0, ess=8.0))
        writer.write_row(_row(iteration=2, update_index=0, median=-3.0, ess=10.0))
    with RunCsvWriter(run_b) as writer:
        writer.write_row(_row(iteration=1, update_index=0, median=-6.0, ess=6.0))
        writer.write_row(_row(iteration=1, update_index=1, median=-6.0, ess=4.0))
        # run_b's iteration 2 row is missing: it must not appear in the
        # aggregate, which only covers rows all runs share
    agg_path = tmp_path / "aggregate.csv"
    write_aggregate([run_a, run_b], agg_path)
    cols = read_run_csv(agg_path)
    assert cols["iteration"].tolist() == [1, 1]
    assert cols["update_index"].tolist() == [0, 1]
    assert cols["median_eval_return"].tolist() == [-5.0, -5.0]
    assert cols["ess"].tolist() == [8.0, 6.0]


def test_config_echo_is_valid_json(tmp_path) -> None:
    import json

    path = tmp_path / "config.echo.json"
    write_config_echo(path, {"sigma": 0.02, "seeds": [1, 2], "optimizer": "adam"})
    loaded = json.loads(path.read_text())
    assert loaded["sigma"] == 0.02
    assert loaded["seeds"] == [1, 2]
