import json
import time

import numpy as np
import pytest

from dpgnn.cli import build_config, derived_seeds, main
from dpgnn.errors import ConfigError


def read_records(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh]


def strip_timing(rows):
    return [{k: v for k, v in row.items() if k != "timing"} for row in rows]


# Sized for the 8-node toy fixture: 1+2 training nodes, 2 validation, 3 test.
FAST = [
    "--epochs", "30", "--hidden", "8", "--dropout", "0.0", "--eval-every", "10",
    "--minority-classes", "1", "--minority-train", "1", "--majority-train", "2",
    "--val-size", "2", "--test-size", "3", "--eta", "0.5",
]


def run_cli(args, monkeypatch):
    monkeypatch.setenv("DPGNN_THREADS", "1")
    return main(args)


def test_run_on_toy_fixture(toy_dataset_dir, tmp_path, monkeypatch, capsys):
    out = tmp_path / "res"
    started = time.perf_counter()
    code = run_cli(
        ["run", "--dataset", str(toy_dataset_dir), "--model", "gcn", "--splits", "2",
         "--seed", "1", "--out", str(out)] + FAST,
        monkeypatch,
    )
    elapsed = time.perf_counter() - started
    assert code == 0
    assert elapsed < 5.0
    rows = read_records(out / "results.jsonl")
    assert len(rows) == 2
    assert all("metrics" in r["record"] for r in rows)
    assert (out / "summary.txt").exists()
    assert "f1_macro" in capsys.readouterr().out


def test_invalid_flag_exits_2(toy_dataset_dir):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--dataset", str(toy_dataset_dir), "--bogus-flag", "1"])
    assert exc.value.code == 2


def test_missing_dataset_dir_exits_1(tmp_path, monkeypatch, capsys):
    code = run_cli(["run", "--dataset", str(tmp_path / "nope"), "--splits", "1"], monkeypatch)
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_missing_dataset_flag_exits_1(monkeypatch, capsys):
    code = run_cli(["run", "--splits", "1"], monkeypatch)
    assert code == 1


def test_config_file_and_overrides(toy_dataset_dir, tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"dataset": str(toy_dataset_dir), "epochs": 77, "seed": 3}))
    cfg = build_config(str(cfg_file), {"epochs": 88})
    assert cfg.epochs == 88  # flag wins
    assert cfg.seed == 3  # file value kept


def test_unknown_config_key_rejected(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"dataset": "x", "mystery_knob": 1}))
    with pytest.raises(ConfigError, match="mystery_knob"):
        build_config(str(cfg_file), {})


def test_derived_seeds_deterministic():
    rng_a, seed_a = derived_seeds(42, 3)
    rng_b, seed_b = derived_seeds(42, 3)
    assert seed_a == seed_b
    assert rng_a.integers(1 << 30) == rng_b.integers(1 << 30)
    _, other = derived_seeds(42, 4)
    assert other != seed_a


def test_rerun_byte_identical_modulo_timing(toy_dataset_dir, tmp_path, monkeypatch):
    args = ["run", "--dataset", str(toy_dataset_dir), "--model", "gcn", "--splits", "2",
            "--seed", "7"] + FAST
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli(args + ["--out", str(out1)], monkeypatch) == 0
    assert run_cli(args + ["--out", str(out2)], monkeypatch) == 0
    r1 = strip_timing(read_records(out1 / "results.jsonl"))
    r2 = strip_timing(read_records(out2 / "results.jsonl"))
    assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)


def test_sweep_eta_outputs(toy_dataset_dir, tmp_path, monkeypatch):
    out = tmp_path / "eta"
    code = run_cli(
        ["sweep-eta", "--dataset", str(toy_dataset_dir), "--etas", "0,1,9",
         "--out", str(out), "--splits", "1"] + FAST,
        monkeypatch,
    )
    assert code == 0
    lines = (out / "eta_sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "eta,pseudo_count,pseudo_val_accuracy,f1_macro"
    assert len(lines) == 4
    counts = [int(line.split(",")[1]) for line in lines[1:]]
    assert counts == sorted(counts, reverse=True)  # non-increasing in eta
    assert counts[-1] == 0  # eta beyond max TIG: empty augmentation


def test_sweep_ratio_outputs(toy_dataset_dir, tmp_path, monkeypatch):
    out = tmp_path / "ratio"
    code = run_cli(
        ["sweep-ratio", "--dataset", str(toy_dataset_dir), "--majority-counts", "2,3",
         "--models", "dpgnn,gcn", "--splits", "1", "--out", str(out)] + FAST,
        monkeypatch,
    )
    assert code == 0
    lines = (out / "ratio_sweep.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 2 * 2  # one row per (ratio, model)
    assert lines[1].split(",")[2] == "dpgnn"


def test_ablate_outputs_variant_tags(toy_dataset_dir, tmp_path, monkeypatch):
    out = tmp_path / "ab"
    code = run_cli(
        ["ablate", "--dataset", str(toy_dataset_dir), "--splits", "1", "--out", str(out)] + FAST,
        monkeypatch,
    )
    assert code == 0
    rows = read_records(out / "results.jsonl")
    variants = {r["record"]["variant"] for r in rows}
    assert variants == {"full", "no_lp", "no_ssl", "no_lp_ssl", "gcn"}
    summary = (out / "summary.txt").read_text()
    assert "delta over gcn" in summary


def test_parallel_pool_matches_serial(toy_dataset_dir, tmp_path, monkeypatch):
    args = ["run", "--dataset", str(toy_dataset_dir), "--model", "gcn", "--splits", "2",
            "--seed", "5"] + FAST
    out1, out2 = tmp_path / "serial", tmp_path / "pool"
    monkeypatch.setenv("DPGNN_THREADS", "1")
    assert main(args + ["--out", str(out1)]) == 0
    monkeypatch.setenv("DPGNN_THREADS", "2")
    assert main(args + ["--out", str(out2)]) == 0
    r1 = strip_timing(read_records(out1 / "results.jsonl"))
    r2 = strip_timing(read_records(out2 / "results.jsonl"))
    assert json.dumps(r1, sort_keys=True) == json.dumps(r2, sort_keys=True)
