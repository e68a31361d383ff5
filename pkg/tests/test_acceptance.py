"""One test per acceptance criterion, each backed by a bundled suite config.

Every test prints a ``criterion N: PASS|FAIL`` line (collected into the
terminal summary) listing the checks that failed.  Criteria that cannot pass
at the configured matrix size are left failing on purpose.
"""
from __future__ import annotations

import subprocess
import sys
from functools import lru_cache

import pytest

from les_lab.runner import load_suite, run_config

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow


@lru_cache(maxsize=None)
def run_suite(name: str):
    return run_config(load_suite(f"acceptance/{name}"))


def failing_checks(result) -> list[str]:
    out = []
    for rep in result.reports:
        for c in rep.checks:
            expected = c.name in rep.expected_failures
            if c.passed == expected:
                out.append(f"{rep.id}:{c.name}" + (" (expected failure passed)" if expected else ""))
    return out


def record(number: int, title: str, passed: bool, detail: str = "") -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {title}"
    if detail:
        line += f" [{detail}]"
    print(line)
    ACCEPTANCE_LINES.append(line)


def check_suite(number: int, title: str, name: str) -> None:
    result = run_suite(name)
    bad = failing_checks(result)
    total = sum(len(r.checks) for r in result.reports)
    detail = f"{total - len(bad)}/{total} checks" + (f"; failing: {', '.join(bad)}" if bad else "")
    passed = result.passed
    record(number, title, passed, detail)
    assert passed, detail


def test_criterion_01_partition_counts():
    check_suite(1, "partition counts", "partition_counts")


def test_criterion_02_oracle_equivalence():
    check_suite(2, "walk-sum oracle equals trace powers", "oracle_equivalence")


def test_criterion_03_first_moment():
    check_suite(3, "first moment equals lambda and finite-n identity", "first_moment")


def test_criterion_04_moment_match():
    check_suite(4, "limit moments match simulated traces", "moment_match")


def test_criterion_05_covariance():
    check_suite(5, "trace covariance matches the limit", "covariance_clt")


def test_criterion_06_gaussianity():
    check_suite(6, "centered traces look Gaussian", "gaussianity")


def test_criterion_07_polynomial():
    check_suite(7, "polynomial test function variance", "polynomial_test_function")


def test_criterion_08_hankel():
    check_suite(8, "Hankel and Toeplitz spectra agree", "hankel_spectrum")


def test_criterion_09_process_covariance():
    check_suite(9, "Brownian entry process covariance", "process_cov")


def test_criterion_10_nonzero_diagonal():
    check_suite(10, "random diagonal variance shift", "nonzero_diag")


def test_criterion_11_schatten():
    check_suite(11, "Schatten 2-norm limit and fluctuations", "schatten_clt_r1")


@pytest.mark.parametrize("suite", ["sym_var_k1"])
def test_criterion_12_determinism(suite, tmp_path):
    blobs = []
    for threads in (1, 8):
        out = tmp_path / f"threads{threads}"
        proc = subprocess.run(
            [sys.executable, "-m", "les_lab.cli", "run", "--config", f"acceptance/{suite}",
             "--out", str(out), "--threads", str(threads)],
            capture_output=True, text=True,
        )
        assert proc.returncode in (0, 1), proc.stderr
        blobs.append((out / "report.json").read_bytes())
    same = blobs[0] == blobs[1]
    record(12, f"report.json byte-identical for threads 1 and 8 ({suite})", same)
    assert same
