import json

import numpy as np
import pytest

from alignlab import cli
from alignlab.pid import JointPmf
from alignlab.simmetrics import write_matrix
from alignlab.syndata import GenSpec, deserialize, generate, serialize


def run(argv):
    return cli.main(argv)


# -------------------------------------------------------------------- gen


def test_gen_writes_dataset(tmp_path, capsys):
    out = tmp_path / "ds.json"
    assert run(["gen", "--r", "4", "--seed", "1", "--out", str(out)]) == 0
    assert "R=4" in capsys.readouterr().out
    ds = deserialize(out)
    assert ds.spec.r == 4 and ds.spec.seed == 1


def test_gen_invalid_r_is_usage_error(tmp_path, capsys):
    assert run(["gen", "--r", "9", "--out", str(tmp_path / "x.json")]) == 2
    assert "usage error" in capsys.readouterr().err


# ------------------------------------------------------------------ train


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "ds.json"
    serialize(generate(GenSpec(r=4, seed=0, split_sizes=(600, 120, 120))), path)
    return path


def test_train_runs_and_writes_record(small_dataset, tmp_path, capsys):
    out = tmp_path / "run.json"
    ckpt = tmp_path / "ckpt.json"
    code = run(
        [
            "train",
            "--data", str(small_dataset),
            "--lambda", "0.5",
            "--epochs", "2",
            "--batch-size", "128",
            "--out", str(out),
            "--checkpoint", str(ckpt),
        ]
    )
    assert code == 0
    assert "acc_A=" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["status"] == "ok"
    assert doc["config"]["lam"] == 0.5
    assert ckpt.exists()


def test_train_negative_lambda_is_usage_error(small_dataset, tmp_path, capsys):
    code = run(["train", "--data", str(small_dataset), "--lambda", "-1", "--out", str(tmp_path / "r.json")])
    assert code == 2
    assert "usage error" in capsys.readouterr().err


def test_train_missing_dataset_is_runtime_error(tmp_path, capsys):
    code = run(["train", "--data", str(tmp_path / "nope.json"), "--out", str(tmp_path / "r.json")])
    assert code == 1
    assert "not found" in capsys.readouterr().err


def test_train_corrupt_dataset_is_runtime_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{broken")
    assert run(["train", "--data", str(bad), "--out", str(tmp_path / "r.json")]) == 1
    assert "error" in capsys.readouterr().err


# ------------------------------------------------------------------ sweep


def test_sweep_with_config_and_report(tmp_path, capsys):
    config = tmp_path / "sweep.json"
    config.write_text(
        json.dumps(
            {
                "generation": {"split_sizes": [300, 60, 60]},
                "training": {"epochs": 1, "batch_size": 64},
                "sweep": {"r_levels": [0, 8], "lambdas": [0.0, 1.0], "seeds": [0]},
            }
        )
    )
    results = tmp_path / "results.csv"
    summary = tmp_path / "summary.csv"
    code = run(["sweep", "--config", str(config), "--out", str(results), "--summary", str(summary)])
    assert code == 0
    assert "4 runs" in capsys.readouterr().out
    assert results.exists() and summary.exists()

    code = run(["report", str(results), "--out", str(tmp_path / "report.json")])
    assert code == 0
    out = capsys.readouterr().out
    assert "R=0" in out and "trend=" in out


def test_sweep_flag_overrides_config(tmp_path):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"generation": {"split_sizes": [300, 60, 60]}, "training": {"epochs": 1, "batch_size": 64}}))
    results = tmp_path / "results.csv"
    code = run(
        [
            "sweep", "--config", str(config),
            "--r-levels", "4", "--lambdas", "0", "--seeds", "0",
            "--out", str(results), "--summary", str(tmp_path / "s.csv"),
        ]
    )
    assert code == 0
    lines = results.read_text().splitlines()
    assert len(lines) == 3  # schema comment + header + one run


def test_sweep_unknown_config_key(tmp_path, capsys):
    config = tmp_path / "sweep.json"
    config.write_text(json.dumps({"training": {"optimizer": "sgd"}}))
    assert run(["sweep", "--config", str(config)]) == 1
    assert "unknown keys" in capsys.readouterr().err


def test_sweep_malformed_config(tmp_path, capsys):
    config = tmp_path / "sweep.json"
    config.write_text("{nope")
    assert run(["sweep", "--config", str(config)]) == 1
    assert "malformed" in capsys.readouterr().err


# ---------------------------------------------------------------- metrics


def test_metrics_on_matrix_files(tmp_path, capsys):
    rng = np.random.default_rng(0)
    fa = rng.normal(size=(40, 6))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_matrix(fa, a)
    write_matrix(fa @ rng.normal(size=(6, 6)), b)
    out = tmp_path / "alignment.json"
    assert run(["metrics", str(a), str(b), "--k", "3", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert set(doc) >= {"cka", "svcca", "mknn"}
    assert "cka" in capsys.readouterr().out


def test_metrics_row_mismatch(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_matrix(np.eye(4), a)
    write_matrix(np.eye(5), b)
    assert run(["metrics", str(a), str(b), "--out", str(tmp_path / "o.json")]) == 1
    assert "row counts differ" in capsys.readouterr().err


def test_metrics_malformed_matrix(tmp_path, capsys):
    a = tmp_path / "a.csv"
    a.write_text("1.0,2.0\n3.0\n")
    assert run(["metrics", str(a), str(a), "--out", str(tmp_path / "o.json")]) == 1
    assert "row 2" in capsys.readouterr().err


# -------------------------------------------------------------------- pid


def test_pid_command(tmp_path, capsys):
    pmf_path = tmp_path / "xor.json"
    p = np.zeros((2, 2, 2))
    for (a, b), y in {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 0}.items():
        p[a, b, y] = 0.25
    JointPmf(p).to_json(pmf_path)
    out = tmp_path / "pid.json"
    assert run(["pid", str(pmf_path), "--out", str(out)]) == 0
    assert "S=1.00" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["S"] == pytest.approx(1.0, abs=1e-6)


def test_pid_invalid_pmf_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"sizes": [2, 2, 2], "p": [0.5]}))
    assert run(["pid", str(bad), "--out", str(tmp_path / "o.json")]) == 1
    assert "error" in capsys.readouterr().err


# ----------------------------------------------------------------- report


def test_report_missing_results(tmp_path, capsys):
    assert run(["report", str(tmp_path / "none.csv")]) == 1
    assert "not found" in capsys.readouterr().err
