"""Pair partitions, cross-matched partitions and their parity/sign data.

Ground sets are ``{1, ..., m}`` (1-based, as in the combinatorics); blocks
are sorted tuples and a partition's blocks are ordered by their minimum.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import combinations
from math import comb, factorial

MAX_GROUND_SIZE = 16


class PartitionKind(str, Enum):
    PAIR = "pair"
    PAIR_WITH_ONE_QUAD = "pair_with_one_quad"


class Parity(str, Enum):
    SAME = "same_parity"
    DIFFERENT = "different_parity"


class BudgetError(ValueError):
    """Requested enumeration exceeds the desk-scale budget."""


@dataclass(frozen=True)
class Partition:
    ground_size: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(b)) for b in self.blocks)
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        object.__setattr__(self, "blocks", blocks)
        seen = sorted(x for b in blocks for x in b)
        if seen != list(range(1, self.ground_size + 1)):
            raise ValueError(f"blocks do not partition [1..{self.ground_size}]: {blocks}")
        sizes = sorted(len(b) for b in blocks)
        if not (all(s == 2 for s in sizes) or (sizes[-1] == 4 and all(s == 2 for s in sizes[:-1]))):
            raise ValueError(f"blocks must be pairs with at most one quad: {blocks}")

    @property
    def kind(self) -> PartitionKind:
        if any(len(b) == 4 for b in self.blocks):
            return PartitionKind.PAIR_WITH_ONE_QUAD
        return PartitionKind.PAIR

    def block_of(self) -> dict[int, int]:
        """Map each element to the (0-based) index of its block."""
        return {x: j for j, b in enumerate(self.blocks) for x in b}

    def __len__(self):
        return len(self.blocks)

    def __str__(self):
        return "{" + ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks) + "}"


def double_factorial(n: int) -> int:
    """n!! with the convention (-1)!! = 0!! = 1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def _check_budget(m: int):
    if m > MAX_GROUND_SIZE:
        raise BudgetError(f"ground set of size {m} exceeds the enumeration cap {MAX_GROUND_SIZE}")


@lru_cache(maxsize=None)
def _pairings(elements: tuple[int, ...]) -> tuple[tuple[tuple[int, int], ...], ...]:
    # smallest unmatched element is paired with each larger candidate in turn
    if not elements:
        return ((),)
    first, rest = elements[0], elements[1:]
    out = []
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1:]
        for tail in _pairings(remaining):
            out.append(((first, partner),) + tail)
    return tuple(out)


def enumerate_pair_partitions(m: int) -> list[Partition]:
    """All pair partitions of [m] in canonical order; there are (m-1)!! of them."""
    if m < 2 or m % 2:
        raise ValueError(f"pair partitions need an even ground size >= 2, got {m}")
    _check_budget(m)
    return [Partition(m, p) for p in _pairings(tuple(range(1, m + 1)))]


def _check_sides(k1: int, k2: int):
    if k1 < 1 or k2 < 1:
        raise ValueError(f"k1 and k2 must be positive, got ({k1}, {k2})")
    _check_budget(2 * (k1 + k2))


def cross_blocks(pi: Partition, k1: int) -> list[tuple[int, ...]]:
    """Blocks meeting both [1..2k1] and its complement."""
    split = 2 * k1
    return [b for b in pi.blocks if b[0] <= split < b[-1]]


def enumerate_cross_matched(k1: int, k2: int) -> list[Partition]:
    """Pair partitions of [2k1+2k2] with at least one block straddling 2k1."""
    _check_sides(k1, k2)
    return [pi for pi in enumerate_pair_partitions(2 * (k1 + k2)) if cross_blocks(pi, k1)]


def enumerate_p24(k1: int, k2: int) -> list[Partition]:
    """Partitions with one quad (two elements per side) and side-internal pairs."""
    _check_sides(k1, k2)
    left = tuple(range(1, 2 * k1 + 1))
    right = tuple(range(2 * k1 + 1, 2 * (k1 + k2) + 1))
    out = []
    for a in combinations(left, 2):
        rest_left = tuple(x for x in left if x not in a)
        for b in combinations(right, 2):
            rest_right = tuple(x for x in right if x not in b)
            for pl in _pairings(rest_left):
                for pr in _pairings(rest_right):
                    out.append(Partition(2 * (k1 + k2), (a + b,) + pl + pr))
    out.sort(key=lambda p: p.blocks)
    return out


def block_parity(block: tuple[int, ...]) -> Parity:
    if len(block) == 2:
        r, s = block
        return Parity.SAME if (r - s) % 2 == 0 else Parity.DIFFERENT
    r1, s1, r2, s2 = sorted(block)
    if (r1 + s1) % 2 == 1 and (r2 + s2) % 2 == 1:
        return Parity.DIFFERENT
    return Parity.SAME


@dataclass(frozen=True)
class BlockParity:
    labels: tuple[Parity, ...]

    @property
    def n_same(self) -> int:
        return sum(lab is Parity.SAME for lab in self.labels)

    @property
    def n_different(self) -> int:
        return sum(lab is Parity.DIFFERENT for lab in self.labels)


def classify_parity(pi: Partition) -> BlockParity:
    return BlockParity(tuple(block_parity(b) for b in pi.blocks))


def is_dp_partition(pi: Partition) -> bool:
    return all(block_parity(b) is Parity.DIFFERENT for b in pi.blocks)


@dataclass(frozen=True)
class SignAssignment:
    signs: dict[int, int]
    flavor: str  # "epsilon" or "tau"

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(self.signs[i] for i in range(1, len(self.signs) + 1))


def sign_assignment(pi: Partition) -> SignAssignment:
    """epsilon signs for pair partitions, tau signs when a quad is present.

    For a pair {r < s}: sign(r) = 1, sign(s) = (-1)^(1+r+s).  A sorted quad
    {r1,s1,r2,s2} gets the pair rule applied to (r1,s1) and (r2,s2).
    """
    signs = {}
    for b in pi.blocks:
        for r, s in zip(b[0::2], b[1::2]):
            signs[r] = 1
            signs[s] = -1 if (r + s) % 2 == 0 else 1
    flavor = "tau" if pi.kind is PartitionKind.PAIR_WITH_ONE_QUAD else "epsilon"
    return SignAssignment(signs, flavor)


def count_pair_partitions(m: int) -> int:
    return double_factorial(m - 1)


def count_cross_matched(k1: int, k2: int) -> int:
    return double_factorial(2 * k1 + 2 * k2 - 1) - double_factorial(2 * k1 - 1) * double_factorial(2 * k2 - 1)


def count_p24(k1: int, k2: int) -> int:
    return comb(2 * k1, 2) * comb(2 * k2, 2) * double_factorial(2 * k1 - 3) * double_factorial(2 * k2 - 3)


def count_dp_pair_partitions(r: int) -> int:
    return factorial(r)
