from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from les_lab.partitions import (
    BudgetError,
    Parity,
    Partition,
    PartitionKind,
    classify_parity,
    count_cross_matched,
    count_p24,
    double_factorial,
    enumerate_cross_matched,
    enumerate_p24,
    enumerate_pair_partitions,
    is_dp_partition,
    sign_assignment,
)


def test_small_enumerations():
    assert [p.blocks for p in enumerate_pair_partitions(2)] == [((1, 2),)]
    assert [p.blocks for p in enumerate_pair_partitions(4)] == [
        ((1, 2), (3, 4)),
        ((1, 3), (2, 4)),
        ((1, 4), (2, 3)),
    ]
    assert len(enumerate_pair_partitions(8)) == 105


def test_enumeration_is_deterministic_and_duplicate_free():
    a = enumerate_pair_partitions(10)
    b = enumerate_pair_partitions(10)
    assert a == b
    assert len(set(a)) == len(a) == double_factorial(9)


@pytest.mark.parametrize("m", [0, 3, 18])
def test_bad_ground_sizes_rejected(m):
    with pytest.raises((ValueError, BudgetError)):
        enumerate_pair_partitions(m)


def test_cross_matched_examples():
    assert [p.blocks for p in enumerate_cross_matched(1, 1)] == [((1, 3), (2, 4)), ((1, 4), (2, 3))]
    assert len(enumerate_cross_matched(1, 2)) == 12 == count_cross_matched(1, 2)
    assert len(enumerate_cross_matched(2, 2)) == 96 == count_cross_matched(2, 2)
    with pytest.raises(BudgetError):
        enumerate_cross_matched(5, 4)


def test_p24_examples():
    assert [p.blocks for p in enumerate_p24(1, 1)] == [((1, 2, 3, 4),)]
    assert len(enumerate_p24(2, 1)) == 6 == count_p24(2, 1)
    assert len(enumerate_p24(2, 2)) == 36 == count_p24(2, 2)
    for pi in enumerate_p24(2, 3):
        assert pi.kind is PartitionKind.PAIR_WITH_ONE_QUAD


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(4, ((1, 2), (2, 3)))
    with pytest.raises(ValueError):
        Partition(6, ((1, 2, 3), (4, 5, 6)))
    assert Partition(4, ((3, 4), (2, 1))).blocks == ((1, 2), (3, 4))


def test_parity_examples():
    assert classify_parity(Partition(4, ((1, 2), (3, 4)))).labels == (Parity.DIFFERENT, Parity.DIFFERENT)
    bp = classify_parity(Partition(4, ((1, 3), (2, 4))))
    assert bp.labels == (Parity.SAME, Parity.SAME) and bp.n_same == 2 and bp.n_different == 0
    assert classify_parity(Partition(4, ((1, 2, 3, 4),))).labels == (Parity.DIFFERENT,)
    assert classify_parity(Partition(4, ((1, 3, 2, 4),))).labels == (Parity.DIFFERENT,)
    assert classify_parity(Partition(6, ((1, 3, 4, 6), (2, 5)))).labels[0] is Parity.SAME


def test_sign_examples():
    s = sign_assignment(Partition(4, ((1, 3), (2, 4))))
    assert s.flavor == "epsilon" and s.as_tuple() == (1, 1, -1, -1)
    assert sign_assignment(Partition(4, ((1, 2), (3, 4)))).as_tuple() == (1, 1, 1, 1)
    t = sign_assignment(Partition(4, ((1, 2, 3, 4),)))
    assert t.flavor == "tau" and t.as_tuple() == (1, 1, 1, 1)


def test_dp_counts():
    for r in range(1, 7):
        parts = enumerate_pair_partitions(2 * r)
        assert sum(is_dp_partition(p) for p in parts) == int(np.prod(range(1, r + 1)))
    assert is_dp_partition(Partition(4, ((1, 2), (3, 4))))
    assert not is_dp_partition(Partition(4, ((1, 3), (2, 4))))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 10**6), st.integers(0, 2**32 - 1))
def test_pair_signs_close_the_walk(r, index, seed):
    parts = enumerate_pair_partitions(2 * r)
    pi = parts[index % len(parts)]
    signs = sign_assignment(pi).signs
    block = pi.block_of()
    x = np.random.default_rng(seed).normal(size=len(pi))
    total = sum((-1) ** i * signs[i] * x[block[i]] for i in range(1, 2 * r + 1))
    assert abs(total) < 1e-12
    for b in pi.blocks:
        assert (signs[b[0]] + signs[b[1]] == 0) == ((b[0] - b[1]) % 2 == 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 10**6), st.integers(0, 2**32 - 1))
def test_quad_signs_close_each_side(k1, k2, index, seed):
    parts = enumerate_p24(k1, k2)
    pi = parts[index % len(parts)]
    signs = sign_assignment(pi).signs
    block = pi.block_of()
    x = np.random.default_rng(seed).normal(size=len(pi))
    left = sum((-1) ** i * signs[i] * x[block[i]] for i in range(1, 2 * k1 + 1))
    right = sum((-1) ** i * signs[i] * x[block[i]] for i in range(2 * k1 + 1, 2 * (k1 + k2) + 1))
    assert abs(left) < 1e-12 and abs(right) < 1e-12
