from __future__ import annotations

import json
import subprocess
import sys

import pytest

from les_lab import cli
from les_lab.runner import EXIT_BUDGET, EXIT_CONFIG, EXIT_PASS, ConfigError, list_suites, parse_config

SMALL_COVARIANCE = {
    "id": "test/small_covariance",
    "kind": "covariance",
    "seed": 3,
    "replicates": 600,
    "mc_samples": 20000,
    "pairs": [[1, 1], [1, 2]],
    "gaussian_ks": [1],
    "ensembles": [
        {"kind": "symmetric", "n": 32, "lambda": 1.0, "family": "gaussian"},
        {"kind": "hermitian", "n": 32, "lambda": 0.5, "family": "complex_gaussian"},
    ],
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


def test_suites_listed(capsys):
    assert cli.main(["suites"]) == EXIT_PASS
    out = capsys.readouterr().out.split()
    assert "acceptance/sym_var_k1" in out and "acceptance/schatten_clt_r1" in out
    assert out == list_suites() and len(out) == 12


def test_missing_field_names_field_and_line(tmp_path, capsys):
    cfg = json.loads(json.dumps(SMALL_COVARIANCE))
    del cfg["ensembles"][0]["n"]
    rc = cli.main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "ensembles[0].n" in err and "line" in err


def test_bad_values_rejected():
    with pytest.raises(ConfigError, match="replicates"):
        parse_config(json.dumps({**SMALL_COVARIANCE, "replicates": -1}))
    with pytest.raises(ConfigError, match="unknown experiment kind"):
        parse_config(json.dumps({**SMALL_COVARIANCE, "kind": "nope"}))
    with pytest.raises(ConfigError):
        parse_config("{not json")


def test_budget_exit_code(tmp_path):
    cfg = {"id": "t", "kind": "partition_counts", "seed": 0, "max_r": 9, "max_cross_sum": 2, "max_quad_sum": 2}
    assert cli.main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == EXIT_BUDGET
    oracle = {"id": "t", "kind": "oracle_check", "seed": 0, "cases": [[40, 40, 4]], "draws": 1}
    assert cli.main(["run", "--config", write(tmp_path, oracle), "--out", str(tmp_path / "o")]) == EXIT_BUDGET


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "o"
    rc = cli.main(["run", "--config", "acceptance/hankel_spectrum", "--out", str(out)])
    assert rc == EXIT_PASS
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "pass" and report["id"] == "acceptance/hankel_spectrum"
    assert (out / "run.log").exists()
    assert "PASS" in capsys.readouterr().out


def test_reports_identical_across_thread_counts(tmp_path):
    cfg = write(tmp_path, SMALL_COVARIANCE)
    blobs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        proc = subprocess.run([sys.executable, "-m", "les_lab.cli", "run", "--config", cfg, "--out", str(out),
                               "--threads", str(threads)], capture_output=True, text=True)
        assert proc.returncode in (0, 1), proc.stderr
        blobs.append((out / "report.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_seed_override_changes_report(tmp_path):
    cfg = write(tmp_path, {**SMALL_COVARIANCE, "ensembles": SMALL_COVARIANCE["ensembles"][:1], "gaussian_ks": []})
    reports = []
    for seed in ("1", "2"):
        out = tmp_path / f"s{seed}"
        cli.main(["run", "--config", cfg, "--out", str(out), "--seed-override", seed])
        reports.append(json.loads((out / "report.json").read_text()))
    assert reports[0]["config"]["seed"] == 1 and reports[1]["config"]["seed"] == 2
    assert reports[0]["reports"] != reports[1]["reports"]
