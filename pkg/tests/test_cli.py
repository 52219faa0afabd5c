"""Command-line interface: subcommands, overrides, exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from iwes.cli import main
from iwes.persistence import load_params, save_params


def write_config(tmp_path, **extra):
    cfg = {
        "objective": "sphere",
        "dim": 4,
        "noise_table_len": 20_000,
        "sigma": 0.1,
        "batch_pairs": 4,
        "learning_rate": 0.05,
        "iterations": 2,
        "seeds": [1],
        "n_eval": 3,
        "workers": 1,
        "out_dir": str(tmp_path / "out"),
    }
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_train_writes_artifacts(tmp_path):
    cfg_path = write_config(tmp_path)
    assert main(["train", "--config", str(cfg_path)]) == 0
    out = tmp_path / "out"
    assert (out / "run_1.csv").exists()
    assert (out / "aggregate.csv").exists()
    assert (out / "summary.csv").exists()
    assert (out / "params_final.bin").exists()
    assert (out / "config.echo.json").exists()


def test_positional_overrides_take_effect(tmp_path):
    cfg_path = write_config(tmp_path)
    assert main(["train", "--config", str(cfg_path), "iterations=1"]) == 0
    echoed = json.loads((tmp_path / "out" / "config.echo.json").read_text())
    assert echoed["iterations"] == 1


def test_train_without_config_uses_defaults_plus_overrides(tmp_path):
    out = tmp_path / "out"
    code = main(
        [
            "train",
            "objective=sphere",
            "dim=3",
            "noise_table_len=20000",
            "batch_pairs=2",
            "iterations=1",
            "seeds=7",
            "n_eval=3",
            "workers=1",
            f"out_dir={out}",
        ]
    )
    assert code == 0
    assert (out / "run_7.csv").exists()


def test_unknown_config_key_is_config_error(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"objective": "sphere", "bogus_key": 1}))
    assert main(["train", "--config", str(path)]) == 1


def test_malformed_json_is_config_error(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    assert main(["train", "--config", str(path)]) == 1


def test_missing_config_file_is_config_error(tmp_path):
    assert main(["train", "--config", str(tmp_path / "nope.json")]) == 1


def test_bad_override_value_is_config_error(tmp_path):
    cfg_path = write_config(tmp_path)
    assert main(["train", "--config", str(cfg_path), "iterations=abc"]) == 1


def test_bad_flag_is_config_error(tmp_path):
    cfg_path = write_config(tmp_path)
    assert main(["train", "--config", str(cfg_path), "--no-such-flag"]) == 1


def test_unknown_subcommand_is_config_error():
    assert main(["frobnicate"]) == 1


def test_sweep_writes_per_value_dirs(tmp_path):
    cfg_path = write_config(tmp_path)
    code = main(
        ["sweep", "--config", str(cfg_path), "--axis", "K", "--values", "0,1"]
    )
    assert code == 0
    out = tmp_path / "out"
    assert (out / "K_0" / "run_1.csv").exists()
    assert (out / "K_1" / "run_1.csv").exists()
    assert (out / "summary.csv").exists()


def test_sweep_bad_axis_is_config_error(tmp_path):
    cfg_path = write_config(tmp_path)
    code = main(
        ["sweep", "--config", str(cfg_path), "--axis", "bogus", "--values", "1"]
    )
    assert code == 1


def test_bench_writes_table(tmp_path):
    cfg_path = write_config(
        tmp_path, objective="pointmass", hidden=4, horizon=5, batch_pairs=2
    )
    out_csv = tmp_path / "bench.csv"
    code = main(
        [
            "bench",
            "--config",
            str(cfg_path),
            "--k-values",
            "0,1",
            "--hidden-values",
            "4",
            "--timed-iters",
            "2",
            "--warmup",
            "1",
            "--out",
            str(out_csv),
        ]
    )
    assert code == 0
    text = out_csv.read_text().splitlines()
    assert text[0] == "hidden,K,median_iter_ms,ratio_vs_k0"
    assert len(text) == 3


def test_eval_prints_median_return(tmp_path, capsys):
    cfg_path = write_config(tmp_path)
    assert main(["train", "--config", str(cfg_path)]) == 0
    params_path = tmp_path / "out" / "params_final.bin"
    code = main(
        ["eval", "--params", str(params_path), "--config", str(cfg_path)]
    )
    assert code == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    label, value = line.split()
    assert label == "median_eval_return"
    assert np.isfinite(float(value))


def test_eval_dim_mismatch_is_config_error(tmp_path):
    cfg_path = write_config(tmp_path)
    params_path = tmp_path / "wrong.bin"
    save_params(params_path, np.zeros(9))
    code = main(
        ["eval", "--params", str(params_path), "--config", str(cfg_path)]
    )
    assert code == 1


def test_eval_corrupt_params_is_runtime_error(tmp_path):
    cfg_path = write_config(tmp_path)
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"IWES\x01\x00\x00")
    code = main(["eval", "--params", str(bad), "--config", str(cfg_path)])
    assert code == 2


def test_module_entry_point_shows_help():
    proc = subprocess.run(
        [sys.executable, "-m", "iwes", "--help"],
        capture_output=True,
        text=True,
        timeout=60,
    )
    assert proc.returncode == 0
    for name in ("train", "sweep", "bench", "eval"):
        assert name in proc.stdout
