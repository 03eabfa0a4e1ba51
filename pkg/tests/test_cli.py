import csv
import json
import subprocess
import sys

import pytest

from gpapprox.cli import EXIT_CELLS_FAILED, EXIT_ERROR, EXIT_OK, main

SYN = {"synthetic": {"input_dim": 2, "n_train": 128, "n_test": 64, "noise_variance": 1e-4,
                     "seed": 1}}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_gen_preset_and_flags(tmp_path):
    assert main(["gen", "--preset", "synth2", "--n-train", "50", "--n-test", "20",
                 "--out", str(tmp_path / "a")]) == EXIT_OK
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["name"] == "synth2" and man["noise_variance"] == 1e-6 and man["n_train"] == 50
    assert main(["gen", "--dim", "3", "--n-train", "10", "--n-test", "5", "--noise", "0.01",
                 "--seed", "9", "--out", str(tmp_path / "b")]) == EXIT_OK
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["seed"] == 9
    assert main(["gen", "--out", str(tmp_path / "c")]) == EXIT_ERROR


def test_gen_from_config(tmp_path):
    cfg = write(tmp_path / "g.json", {"schema": 1, "dataset": SYN, "methods": []})
    assert main(["gen", "--config", cfg, "--out", str(tmp_path / "d")]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "d" / "train.csv")))
    assert len(rows) == 129


def test_run_and_curves(tmp_path):
    cfg = write(tmp_path / "r.json", {"schema": 1, "dataset": SYN, "runs": 2,
                                      "methods": [{"method": "sod", "m": [16, 32]}],
                                      "optimizer": {"max_evals": 10}})
    out = tmp_path / "res"
    assert main(["run", "--config", cfg, "--out", str(out), "--seed", "4"]) == EXIT_OK
    report = json.loads((out / "results.json").read_text())
    assert [c["seed"] for c in report["cells"]] == [4, 5, 4, 5]
    assert main(["curves", "--config", str(out), "--out", str(tmp_path / "cv")]) == EXIT_OK
    assert len(list(csv.reader(open(tmp_path / "cv" / "curves.csv")))) == 3


def test_run_with_failed_cells_exits_2(tmp_path):
    cfg = write(tmp_path / "r.json", {"schema": 1, "dataset": SYN, "runs": 1,
                                      "methods": [{"method": "cg", "m": [4]},
                                                  {"method": "sod", "m": [8]}]})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CELLS_FAILED
    assert (tmp_path / "o" / "results.csv").exists()


def test_run_compare(tmp_path):
    cfg = write(tmp_path / "r.json", {"schema": 1, "dataset": SYN, "runs": 1,
                                      "methods": [{"method": "sod", "m": [16]}],
                                      "optimizer": {"max_evals": 10}})
    assert main(["run", "--compare", "--config", cfg, "--out", str(tmp_path / "p")]) == EXIT_OK
    assert (tmp_path / "p" / "deltas.csv").exists()
    assert (tmp_path / "p" / "learned" / "results.json").exists()


def test_run_file_dataset(tmp_path):
    main(["gen", "--dim", "2", "--n-train", "60", "--n-test", "30", "--noise", "0.01",
          "--out", str(tmp_path / "data")])
    cfg = write(tmp_path / "f.json", {"schema": 1, "runs": 1,
                                      "dataset": {"train": "data/train.csv", "test": "data/test.csv"},
                                      "methods": [{"method": "fitc", "m": [8]}],
                                      "optimizer": {"max_evals": 5}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    rep = json.loads((tmp_path / "o" / "results.json").read_text())
    assert rep["dataset"]["standardization"]["targets_centered"] is True


def test_trace(tmp_path):
    cfg = write(tmp_path / "t.json", {"schema": 1, "dataset": SYN, "ard": False,
                                      "trace": {"max_iter": 30, "sod_reference": [16, 32]}})
    assert main(["trace", "--config", cfg, "--out", str(tmp_path / "t")]) == EXIT_OK
    for name in ("trace.csv", "sod_reference.csv", "error_vs_time.csv"):
        assert (tmp_path / "t" / name).exists()


def test_bad_config_exits_1(tmp_path):
    cfg = write(tmp_path / "bad.json", {"dataset": SYN, "methods": []})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_ERROR
    assert main(["run", "--config", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "o")]) == EXIT_ERROR


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gpapprox.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("gen", "run", "curves", "trace"):
        assert sub in proc.stdout
