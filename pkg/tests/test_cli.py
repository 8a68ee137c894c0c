import csv
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from pllvle.cli import main
from pllvle.data import load_csv

ROOT = Path(__file__).resolve().parents[1]
YEAST = str(ROOT / "data" / "yeast.csv")
BLOBS_TOML = str(ROOT / "configs" / "blobs.toml")


def run(*argv):
    return main([str(a) for a in argv])


def test_corrupt_uniform_expectation(tmp_path, capsys):
    out = tmp_path / "u.csv"
    assert run("corrupt", "--mode", "uniform", "--xi", "0.5", "--seed", "7", YEAST, out) == 0
    report = json.loads((tmp_path / "u.csv.report.json").read_text())
    assert abs(report["avg_candidates"] - 5.5) < 0.15
    assert report["seed"] == 7 and report["mode"] == "uniform" and report["true_label_coverage"] == 1.0
    assert len(report["per_class_flip_rate"]) == 10


def test_corrupt_xi_zero_is_identity(tmp_path):
    out = tmp_path / "z.csv"
    assert run("corrupt", "--xi", "0", YEAST, out) == 0
    a, b = load_csv(YEAST), load_csv(out)
    assert np.array_equal(a.candidates, b.candidates) and np.array_equal(a.features, b.features)


def test_corrupt_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run("corrupt", "--seed", "3", YEAST, tmp_path / name) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv.report.json").read_bytes() == (tmp_path / "b.csv.report.json").read_bytes()


def test_instance_dependent_caches_clean_model(tmp_path):
    cache = tmp_path / "clean"
    args = ("corrupt", "--mode", "instance_dependent", "--standardize", "--clean-model-dir", cache, YEAST)
    assert run(*args, tmp_path / "a.csv") == 0
    stamp = os.path.getmtime(cache / "models.bin")
    time.sleep(0.05)
    assert run(*args, tmp_path / "b.csv") == 0
    assert os.path.getmtime(cache / "models.bin") == stamp
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_corrupt_validation_errors(tmp_path, capsys):
    assert run("corrupt", "--xi", "1.5", YEAST, tmp_path / "o.csv") == 2
    assert run("corrupt", tmp_path / "missing.csv", tmp_path / "o.csv") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("f0,candidates,true\n1,0;1,0\n")
    assert run("corrupt", bad, tmp_path / "o.csv") == 2
    assert "error" in capsys.readouterr().err


def test_train_blobs_config(tmp_path, capsys):
    start = time.perf_counter()
    assert run("train", "--config", BLOBS_TOML, "--out", tmp_path / "full") == 0
    assert time.perf_counter() - start < 120
    assert "test accuracy" in capsys.readouterr().out
    assert {"config.json", "models.bin", "models.json", "metrics.csv"} <= set(os.listdir(tmp_path / "full"))


def test_train_seed_repeat_identical(tmp_path):
    for name in ("a", "b"):
        assert run("train", "--data", "blobs:overlap", "--epochs", "15", "--seed", "5", "--out", tmp_path / name) == 0
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_train_ablation_lacks_le_columns(tmp_path):
    assert run("train", "--data", "blobs:overlap", "--epochs", "12", "--ablate-no-le", "--out", tmp_path / "ab") == 0
    with open(tmp_path / "ab" / "metrics.csv") as fh:
        header = next(csv.reader(fh))
    assert "le_quality" not in header and "d_convergence" not in header and "kl" not in header


def test_train_toml_and_overrides(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[data]\ntrain = "blobs:separable"\n[train]\ntotal_epochs = 12\nlam = 5.0\n')
    assert run("train", "--config", cfg, "--epochs", "11", "--out", tmp_path / "o") == 0
    saved = json.loads((tmp_path / "o" / "config.json").read_text())["train"]
    assert saved["total_epochs"] == 11 and saved["lam"] == 5.0


@pytest.mark.parametrize("toml, flags", [
    ('[train]\nbogus = 1\n', ["--data", "blobs:overlap"]),
    ('[data]\ntrain = "blobs:overlap"\n[train]\nwarmup_epochs = 20\ntotal_epochs = 5\n', []),
    ("this is = not toml [", ["--data", "blobs:overlap"]),
    ("", []),
    ("", ["--data", "nowhere.csv"]),
    ("", ["--data", "blobs:overlap", "--folds", "1"]),
])
def test_train_validation_exit_2(tmp_path, toml, flags):
    cfg = tmp_path / "c.toml"
    cfg.write_text(toml)
    start = time.perf_counter()
    assert run("train", "--config", cfg, *flags, "--out", tmp_path / "o") == 2
    assert time.perf_counter() - start < 1.0
    assert not (tmp_path / "o").exists()


def test_train_cross_validation_summary(tmp_path, capsys):
    assert run("train", "--data", "blobs:separable", "--folds", "3", "--epochs", "3", "--warmup", "1",
               "--ablate-no-le", "--out", tmp_path / "cv") == 0
    summary = json.loads((tmp_path / "cv" / "summary.json").read_text())
    assert len(summary["accuracies"]) == 3
    assert "3-fold accuracy" in capsys.readouterr().out


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PLLVLE_OUTPUT_ROOT", str(tmp_path / "root"))
    assert run("train", "--data", "blobs:separable", "--epochs", "3", "--warmup", "1", "--seed", "2") == 0
    assert (tmp_path / "root" / "blobs-separable-full-seed2" / "metrics.csv").exists()


def test_eval_checkpoint(tmp_path, capsys):
    assert run("train", "--data", "blobs:separable", "--epochs", "12", "--out", tmp_path / "m") == 0
    capsys.readouterr()
    assert run("eval", "--checkpoint", tmp_path / "m", "--data", "blobs:separable") == 0
    assert json.loads(capsys.readouterr().out)["accuracy"] > 0.95
    assert run("eval", "--checkpoint", tmp_path / "nothing", "--data", "blobs:separable") == 2


def test_verify_commands(capsys):
    assert run("verify", "--only", "graph", "special") == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and all(line.startswith("PASS") for line in out)
    assert run("verify", "--only", "graph", "--inject-fault", "graph") == 3
    assert run("verify", "--only", "nonsense") == 2
    assert run("verify", "--list") == 0


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pllvle.cli", "verify", "--only", "graph"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "PASS graph" in proc.stdout
