from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from les_lab import matrix_lab as ml
from les_lab.limit_integrals import TestFunction
from les_lab.matrix_lab import (
    BrownianPathSpec,
    EnsembleSpec,
    build_matrix,
    diagonal_draws,
    draw_entries,
    expected_first_trace,
    expected_trace,
    hankel_spectrum_check,
    offset_counts,
    sample_traces,
    sample_w,
    sample_w_process,
    schatten_norm,
    toeplitz_from_entries,
    trace_formula_oracle,
    trace_powers,
    with_diagonal,
    write_samples_csv,
)
from les_lab.partitions import BudgetError

KINDS = [("symmetric", "gaussian"), ("non_symmetric", "gaussian"), ("hermitian", "complex_gaussian")]


def spec(kind="symmetric", n=6, p=4, family="gaussian", diag="zero"):
    return EnsembleSpec.from_lambda(kind, n, p / n, family, diag)


def test_layout_matches_definition():
    n, p = 5, 3
    a = np.arange(-(p - 1), n, dtype=float) * 10 + 1  # a_j = 10 j + 1
    T = toeplitz_from_entries(a, n, p) * np.sqrt(n)
    for i in range(n):
        for j in range(p):
            assert T[i, j] == 10 * (i - j) + 1


@pytest.mark.parametrize("kind,family", KINDS)
def test_reflection_rules_and_zero_diagonal(kind, family):
    s = spec(kind, 7, 5, family)
    a = draw_entries(s, seed=3, replicate=2)
    z = s.p - 1
    assert a[z] == 0
    pos, neg = a[z + 1: z + 5], a[:z][::-1]
    if kind == "symmetric":
        assert np.array_equal(pos, neg)
    elif kind == "hermitian":
        assert np.array_equal(np.conj(pos), neg)
    else:
        assert not np.array_equal(pos, neg)
    T = build_matrix(s, 3, 2)
    assert T.shape == (7, 5)
    if kind == "hermitian":
        sq = T[:5, :5]
        assert np.allclose(sq, sq.conj().T)


def test_random_diagonal_uses_separate_stream():
    zero = spec("symmetric", 8, 8)
    rand = with_diagonal(zero, "random")
    a, b = draw_entries(zero, 1, 4), draw_entries(rand, 1, 4)
    z = zero.p - 1
    assert b[z] == diagonal_draws(rand, 5, 1)[4] != 0
    b[z] = 0
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        with_diagonal(spec("hermitian", 4, 4, "complex_gaussian"), "random")


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec.from_lambda("symmetric", 4, 1.0, "complex_gaussian")
    with pytest.raises(ValueError):
        EnsembleSpec.from_lambda("symmetric", 4, 0.01, "gaussian")


@pytest.mark.parametrize("kind,family", KINDS)
def test_trace_paths_agree(kind, family):
    for n, p in ((9, 5), (5, 9), (8, 8)):
        T = build_matrix(spec(kind, n, p, family), 7)
        g = trace_powers(T, 6, "gram")
        s = trace_powers(T, 6, "svd")
        assert np.allclose(g, s, rtol=1e-10)
        direct = [np.trace(np.linalg.matrix_power(T @ T.conj().T, k)).real for k in range(1, 7)]
        assert np.allclose(g, direct, rtol=1e-10)


def test_trace_edge_cases():
    assert np.allclose(trace_powers(np.eye(4, 6), 3), [4, 4, 4])
    assert np.array_equal(trace_powers(np.zeros((3, 5)), 4), np.zeros(4))
    with pytest.raises(BudgetError):
        trace_powers(np.eye(3), 13)
    with pytest.raises(FloatingPointError):
        trace_powers(np.array([[np.nan]]), 1)


def test_offset_counts_sum_to_cells():
    for n, p in ((1, 1), (4, 7), (9, 3)):
        c = offset_counts(n, p)
        assert c.sum() == n * p and c.min() >= 1


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(KINDS), st.integers(1, 6), st.integers(1, 6), st.integers(1, 3),
       st.integers(0, 2**31 - 1))
def test_oracle_matches_direct_trace(kind_family, n, p, k, seed):
    kind, family = kind_family
    s = EnsembleSpec(kind, n, p, ml.EntryDistribution(family))
    a = draw_entries(s, seed)
    direct = trace_powers(toeplitz_from_entries(a, n, p), k, "svd")[k - 1]
    oracle = trace_formula_oracle(a, n, p, k, hermitian=kind == "hermitian")
    assert abs(oracle - direct) <= 1e-9 * max(1.0, abs(direct))


def test_oracle_accepts_dict_and_enforces_budget():
    a = {j: float(j) for j in range(-2, 4)}
    T = toeplitz_from_entries(np.array([a[j] for j in range(-2, 4)]), 4, 3)
    assert trace_formula_oracle(a, 4, 3, 2) == pytest.approx(trace_powers(T, 2)[1])
    with pytest.raises(BudgetError):
        trace_formula_oracle(np.zeros(299), 200, 100, 3)


@pytest.mark.parametrize("kind,family", KINDS + [("symmetric", "rademacher"), ("symmetric", "uniform_scaled")])
def test_expected_trace_first_power(kind, family):
    for diag in ("zero", "random") if kind != "hermitian" else ("zero",):
        s = spec(kind, 5, 3, family, diag)
        assert expected_trace(s, 1) == pytest.approx(expected_first_trace(s))


def test_expected_trace_matches_simulation():
    s = spec("symmetric", 6, 4, "rademacher")
    traces = sample_traces(s, 2, 4000, seed=2)[:, 1]
    se = traces.std(ddof=1) / np.sqrt(traces.size)
    assert abs(traces.mean() - expected_trace(s, 2)) < 4 * se


def test_hankel_spectrum():
    for n, p in ((6, 4), (5, 9)):
        assert hankel_spectrum_check(spec("non_symmetric", n, p), seed=1).passed
    with pytest.raises(ValueError):
        hankel_spectrum_check(spec("symmetric"), seed=1)


def test_schatten_norm():
    T = build_matrix(spec("symmetric", 7, 7), 0)
    sv = np.linalg.svd(T, compute_uv=False)
    assert schatten_norm(T, 4) == pytest.approx(np.sum(sv**4) ** 0.25)
    assert schatten_norm(T, 2) == pytest.approx(np.linalg.norm(T))
    with pytest.raises(ValueError):
        schatten_norm(T, 3)


def test_samples_are_centered_and_deterministic():
    s = spec("symmetric", 16, 16)
    w = sample_w(s, 2, 50, seed=4)
    assert abs(w.values.mean()) < 1e-12
    ml.clear_sample_cache()
    ml.set_workers(3)
    try:
        again = sample_w(s, 2, 50, seed=4)
    finally:
        ml.set_workers(1)
    assert np.array_equal(w.values, again.values)
    with pytest.raises(ValueError):
        sample_w(s, 1, 1, seed=4)


def test_polynomial_sample_matches_combination():
    s = spec("non_symmetric", 12, 8)
    q = sample_w(s, TestFunction((5.0, 1.0, 2.0)), 40, seed=1).values
    w1, w2 = sample_w(s, 1, 40, 1).values, sample_w(s, 2, 40, 1).values
    assert np.allclose(q, w1 + 2 * w2)
    assert np.allclose(sample_w(s, TestFunction((3.0,)), 40, 1).values, 0.0)


def test_oracle_centering_close_to_sample_centering():
    s = spec("symmetric", 8, 8, "rademacher")
    a = sample_w(s, 1, 200, 2, "oracle_mean").values
    b = sample_w(s, 1, 200, 2).values
    assert np.allclose(a - a.mean(), b)


def test_process_samples():
    s = spec("symmetric", 12, 12)
    path = BrownianPathSpec((0.0, 1.0, 2.0))
    ws = sample_w_process(s, 1, path, 300, seed=3)
    assert [w.time for w in ws] == [0.0, 1.0, 2.0]
    assert np.all(ws[0].values == 0)
    # quadratic in the entries, so Var w(2) is 4 Var w(1) in expectation
    ratio = ws[2].values.var() / ws[1].values.var()
    assert 2.5 < ratio < 6.0
    with pytest.raises(ValueError):
        BrownianPathSpec((1.0, 0.5))
    with pytest.raises(ValueError):
        sample_w_process(spec("symmetric", family="rademacher"), 1, path, 10, 0)


def test_brownian_increment_law():
    s = spec("non_symmetric", 20, 20)
    path = BrownianPathSpec((0.5, 2.0))
    paths = np.stack([ml._brownian_entries(s, path, 1, r) for r in range(300)])
    inc = np.delete(paths[:, 1] - paths[:, 0], s.p - 1, axis=1).ravel()
    assert abs(inc.var() - 1.5) < 0.1
    first = np.delete(paths[:, 0], s.p - 1, axis=1).ravel()
    assert abs(np.corrcoef(first, inc)[0, 1]) < 0.03


def test_csv_export(tmp_path):
    s = spec("symmetric", 10, 10)
    static = sample_w(s, 1, 5, 0)
    proc = sample_w_process(s, 1, BrownianPathSpec((1.0,)), 5, 0)
    out = tmp_path / "w.csv"
    write_samples_csv([static, *proc], out)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["replicate", "k_or_Q", "value", "time"]
    assert len(rows) == 11 and rows[1][3] == "" and rows[6][3] == "1.0"
    assert float(rows[2][2]) == static.values[1]
