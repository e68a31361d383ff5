"""Monte-Carlo evaluation of the limit moments and covariances.

Every limit quantity here is a sum, over a family of partitions, of the
volume of the set of "walks" that stay inside the admissible strip.  A walk
starts at a base point ``x0`` (and ``y0`` for the second trace), and its
position after step ``q`` is

    base + sum_{l <= q} (-1)^l * s_l * z[block(l)]

where ``s`` is a +/-1 sign pattern and ``z`` holds one variable per block.
Positions after odd steps are column indices (scaled into ``[0, lambda]``),
after even steps row indices (scaled into ``[0, 1]``).  The integrals are
estimated by uniform sampling over a box with volume weighting.

Covariance families used by the predictors (``c`` = number of blocks that
straddle the two traces):

* pair terms: cross-matched pair partitions with ``c >= 4``.  With ``c = 2``
  the side closure forces both straddling blocks onto the same magnitude, so
  they are really a 4-element block and already counted by the quad terms.
* quad terms: partitions with one straddling 4-element block.
"""
from __future__ import annotations

import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .partitions import (
    MAX_GROUND_SIZE,
    BudgetError,
    Parity,
    Partition,
    PartitionKind,
    block_parity,
    cross_blocks,
    enumerate_cross_matched,
    enumerate_p24,
    enumerate_pair_partitions,
    is_dp_partition,
    sign_assignment,
)

MAX_MOMENT_ORDER = 8
MIN_SAMPLES = 10_000
_CHUNK = 1 << 16


class Variant(str, Enum):
    I_MINUS = "I_minus"
    I_PLUS = "I_plus"
    II_MINUS = "II_minus"
    II_PLUS = "II_plus"

    @property
    def flipped(self) -> bool:
        return self in (Variant.I_PLUS, Variant.II_PLUS)

    @property
    def needs_quad(self) -> bool:
        return self in (Variant.II_MINUS, Variant.II_PLUS)


class EnsembleKind(str, Enum):
    SYMMETRIC = "symmetric"
    NON_SYMMETRIC = "non_symmetric"
    HERMITIAN = "hermitian"


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    std_error: float
    samples: int
    seed: int

    def __add__(self, other: "IntegralEstimate") -> "IntegralEstimate":
        return IntegralEstimate(
            self.value + other.value,
            math.hypot(self.std_error, other.std_error),
            self.samples + other.samples,
            self.seed,
        )

    def scaled(self, factor: float) -> "IntegralEstimate":
        return IntegralEstimate(self.value * factor, self.std_error * abs(factor), self.samples, self.seed)


ZERO = IntegralEstimate(0.0, 0.0, 0, 0)


@dataclass(frozen=True)
class IntegralDomain:
    """Box for the block variables of one term, plus optional closure elimination."""

    lam: float
    lows: tuple[float, ...]
    highs: tuple[float, ...]
    eliminated: int | None = None  # block solved from the first-trace closure
    n_base: int = 1  # base points x0 (and y0), each uniform on [0, 1]

    @property
    def m_half(self) -> float:
        return min(self.lam, 1.0)

    @property
    def free_blocks(self) -> tuple[int, ...]:
        return tuple(b for b in range(len(self.lows)) if b != self.eliminated)

    @property
    def volume(self) -> float:
        return float(np.prod([self.highs[b] - self.lows[b] for b in self.free_blocks]))

    @property
    def dimension(self) -> int:
        return len(self.free_blocks) + self.n_base


@dataclass(frozen=True)
class TestFunction:
    """Polynomial Q(x) = sum_j coefficients[j] * x**j."""

    __test__ = False  # keeps pytest from collecting it
    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) < 1:
            raise ValueError("test function needs at least one coefficient")

    @property
    def degree(self) -> int:
        nz = [j for j, c in enumerate(self.coefficients) if c != 0.0]
        return nz[-1] if nz else 0


def _block_range(signs: Iterable[int], lam: float) -> tuple[float, float]:
    # a block variable z enters as offsets s*z, and offsets live in [-lam, 1]
    signs = set(signs)
    if signs == {1}:
        return -lam, 1.0
    if signs == {-1}:
        return -1.0, lam
    m = min(lam, 1.0)
    return -m, m


@dataclass(frozen=True)
class _Term:
    """One integrand: sign pattern, block map, side split and domain."""

    signs: tuple[int, ...]
    block_of: tuple[int, ...]  # 0-based block index for each element 0..m-1
    split: int | None  # number of elements in the first trace, None for moments
    domain: IntegralDomain

    @property
    def n_blocks(self) -> int:
        return len(self.domain.lows)


def _make_term(pi: Partition, lam: float, split: int | None, flip_second: bool, delta: bool) -> _Term:
    base = sign_assignment(pi).signs
    signs = []
    for q in range(1, pi.ground_size + 1):
        s = base[q]
        if flip_second and split is not None and q > split:
            s = -s
        signs.append(s)
    bmap = pi.block_of()
    block_of = tuple(bmap[q] for q in range(1, pi.ground_size + 1))
    lows, highs = [], []
    for b in pi.blocks:
        lo, hi = _block_range((signs[q - 1] for q in b), lam)
        lows.append(lo)
        highs.append(hi)
    eliminated = None
    if delta:
        cross = cross_blocks(pi, split // 2)
        if not cross:
            raise ValueError(f"partition {pi} has no cross-matched block")
        # block containing the smallest cross-matched index
        first = min(cross, key=lambda b: b[0])
        eliminated = pi.blocks.index(first)
    return _Term(tuple(signs), block_of, split, IntegralDomain(lam, tuple(lows), tuple(highs), eliminated,
                                                               1 if split is None else 2))


def _step_matrix(term: _Term, elements: range) -> np.ndarray:
    """Cumulative coefficient matrix: row l gives the walk displacement after step l."""
    steps = np.zeros((len(elements), term.n_blocks))
    for row, q in enumerate(elements):
        steps[row, term.block_of[q - 1]] = (-1) ** q * term.signs[q - 1]
    return np.cumsum(steps, axis=0)


def _inside(positions: np.ndarray, first_step: int, lam: float) -> np.ndarray:
    # column after odd steps, row after even steps
    ok = np.ones(positions.shape[0], dtype=bool)
    for col in range(positions.shape[1]):
        upper = lam if (first_step + col) % 2 == 1 else 1.0
        v = positions[:, col]
        ok &= (v >= 0.0) & (v <= upper)
    return ok


def _evaluate(term: _Term, points: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Indicator of the integrand at sample points.

    ``points`` has one column per block (the eliminated block's column is
    overwritten); ``base`` has one column per trace.
    """
    dom = term.domain
    lam = dom.lam
    m = len(term.signs)
    ok = np.ones(points.shape[0], dtype=bool)
    if dom.eliminated is not None:
        coef = np.zeros(term.n_blocks)
        for q in range(1, term.split + 1):
            coef[term.block_of[q - 1]] += (-1) ** q * term.signs[q - 1]
        e = dom.eliminated
        rest = np.delete(np.arange(term.n_blocks), e)
        solved = -(points[:, rest] @ coef[rest]) / coef[e]
        points = points.copy()
        points[:, e] = solved
        ok &= (solved >= dom.lows[e]) & (solved <= dom.highs[e])
    if term.split is None:
        walk = base[:, :1] + points @ _step_matrix(term, range(1, m + 1)).T
        return ok & _inside(walk, 1, lam)
    first = base[:, :1] + points @ _step_matrix(term, range(1, term.split + 1)).T
    second = base[:, 1:2] + points @ _step_matrix(term, range(term.split + 1, m + 1)).T
    return ok & _inside(first, 1, lam) & _inside(second, term.split + 1, lam)


def integrand(term: _Term, point: Sequence[float]) -> int:
    """Integrand at a single point ``(x0[, y0], z_1, ..., z_B)``."""
    n_base = 1 if term.split is None else 2
    point = np.asarray(point, dtype=float)
    if point.shape != (n_base + term.n_blocks,):
        raise ValueError(f"expected {n_base + term.n_blocks} coordinates, got {point.shape}")
    dom = term.domain
    base, z = point[:n_base], point[n_base:]
    if np.any((base < 0) | (base > 1)):
        raise ValueError("base point outside [0, 1]")
    for b in dom.free_blocks:
        if not dom.lows[b] <= z[b] <= dom.highs[b]:
            raise ValueError(f"block variable {b} = {z[b]} outside [{dom.lows[b]}, {dom.highs[b]}]")
    return int(_evaluate(term, z[None, :], base[None, :])[0])


def moment_integrand(pi: Partition, point: Sequence[float], lam: float) -> int:
    """Walk indicator for a moment term: ``point = (x0, z_1, ..., z_B)``."""
    if pi.kind is not PartitionKind.PAIR:
        raise ValueError("moment integrand needs a pair partition")
    return integrand(_make_term(pi, lam, None, False, False), point)


def _mc(term: _Term, samples: int, seed_words: Sequence[int]) -> IntegralEstimate:
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_words)))
    dom = term.domain
    lows, highs = np.array(dom.lows), np.array(dom.highs)
    n_base = 1 if term.split is None else 2
    hits = 0
    done = 0
    while done < samples:
        size = min(_CHUNK, samples - done)
        base = rng.random((size, n_base))
        z = lows + (highs - lows) * rng.random((size, term.n_blocks))
        hits += int(np.count_nonzero(_evaluate(term, z, base)))
        done += size
    vol = dom.volume
    frac = hits / samples
    se = vol * math.sqrt(frac * (1.0 - frac) / (samples - 1)) if samples > 1 else 0.0
    return IntegralEstimate(vol * frac, se, samples, int(seed_words[0]))


def _kahan_total(estimates: Sequence[IntegralEstimate], weights: Sequence[float], seed: int) -> IntegralEstimate:
    value = math.fsum(w * e.value for w, e in zip(weights, estimates))
    var = math.fsum((w * e.std_error) ** 2 for w, e in zip(weights, estimates))
    return IntegralEstimate(value, math.sqrt(var), sum(e.samples for e in estimates), seed)


# ---------------------------------------------------------------------------
# per-partition cache

_FAMILY_CODES = {"moment": 1, "pair": 2, "quad": 3}
_VARIANT_CODES = {None: 0, Variant.I_MINUS: 1, Variant.I_PLUS: 2, Variant.II_MINUS: 3, Variant.II_PLUS: 4}


@dataclass
class EstimateCache:
    """Per-partition estimates keyed by everything that determines them."""

    entries: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def get(self, key):
        with self.lock:
            return self.entries.get(key)

    def put(self, key, value: IntegralEstimate):
        with self.lock:
            self.entries[key] = value

    def clear(self):
        with self.lock:
            self.entries.clear()


CACHE = EstimateCache()
_workers = 1


def set_workers(n: int):
    """Thread count for partition fan-out; results do not depend on it."""
    global _workers
    _workers = max(1, int(n))


def default_samples(k1: int, k2: int = 0) -> int:
    return 1_000_000 if k1 + k2 <= 3 else 100_000


def _lam_key(lam: float) -> str:
    return repr(float(lam))


def _estimate_family(family: str, parts: Sequence[Partition], variant: Variant | None,
                     k1: int, k2: int, lam: float, samples: int, seed: int) -> list[IntegralEstimate]:
    """Estimate one integral per partition, in parallel, in index order."""
    if samples < MIN_SAMPLES:
        raise ValueError(f"samples must be >= {MIN_SAMPLES}, got {samples}")
    split = None if family == "moment" else 2 * k1
    flip = variant is not None and variant.flipped
    delta = variant in (Variant.I_MINUS, Variant.I_PLUS)

    def one(idx_pi):
        idx, pi = idx_pi
        key = (family, k1, k2, _lam_key(lam), variant, samples, seed, idx)
        hit = CACHE.get(key)
        if hit is not None:
            return hit
        term = _make_term(pi, lam, split, flip, delta)
        est = _mc(term, samples, [seed, _FAMILY_CODES[family], k1, k2, idx, _VARIANT_CODES[variant]])
        CACHE.put(key, est)
        return est

    items = list(enumerate(parts))
    if _workers == 1 or len(items) < 2:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=_workers) as pool:
        return list(pool.map(one, items))


# ---------------------------------------------------------------------------
# moments

def _check_order(r: int):
    if r < 1 or r > MAX_MOMENT_ORDER:
        raise BudgetError(f"moment order must be in [1, {MAX_MOMENT_ORDER}], got {r}")


def estimate_M(r: int, lam: float, samples: int | None = None, seed: int = 0) -> IntegralEstimate:
    """Limit of E (1/n) Tr (TT')^r for symmetric and Hermitian ensembles."""
    _check_order(r)
    samples = samples or default_samples(r)
    parts = enumerate_pair_partitions(2 * r)
    ests = _estimate_family("moment", parts, None, r, 0, lam, samples, seed)
    return _kahan_total(ests, [1.0] * len(ests), seed)


def estimate_M_nonsym(r: int, lam: float, samples: int | None = None, seed: int = 0) -> IntegralEstimate:
    """Limit moment for the non-symmetric ensemble: different-parity pairings only."""
    _check_order(r)
    samples = samples or default_samples(r)
    all_parts = enumerate_pair_partitions(2 * r)
    ests = _estimate_family("moment", all_parts, None, r, 0, lam, samples, seed)
    weights = [1.0 if is_dp_partition(pi) else 0.0 for pi in all_parts]
    kept = [(w, e) for w, e in zip(weights, ests) if w]
    return _kahan_total([e for _, e in kept], [w for w, _ in kept], seed)


def estimate_moment(r: int, lam: float, kind: EnsembleKind | str, samples: int | None = None,
                    seed: int = 0) -> IntegralEstimate:
    if EnsembleKind(kind) is EnsembleKind.NON_SYMMETRIC:
        return estimate_M_nonsym(r, lam, samples, seed)
    return estimate_M(r, lam, samples, seed)


# ---------------------------------------------------------------------------
# covariance integrals

def _check_pair(k1: int, k2: int):
    if k1 < 1 or k2 < 1:
        raise ValueError(f"k1 and k2 must be positive, got ({k1}, {k2})")
    if 2 * (k1 + k2) > MAX_GROUND_SIZE:
        raise BudgetError(f"2(k1+k2) = {2 * (k1 + k2)} exceeds the enumeration cap {MAX_GROUND_SIZE}")


def estimate_f(pi: Partition, variant: Variant | str, k1: int, k2: int, lam: float,
               samples: int | None = None, seed: int = 0) -> IntegralEstimate:
    """One covariance integral for a single partition."""
    variant = Variant(variant)
    _check_pair(k1, k2)
    if pi.ground_size != 2 * (k1 + k2):
        raise ValueError(f"partition ground size {pi.ground_size} != 2(k1+k2)")
    if variant.needs_quad != (pi.kind is PartitionKind.PAIR_WITH_ONE_QUAD):
        raise ValueError(f"variant {variant.value} does not apply to a {pi.kind.value} partition")
    if not variant.needs_quad and not cross_blocks(pi, k1):
        raise ValueError(f"partition {pi} is not cross-matched")
    samples = samples or default_samples(k1, k2)
    term = _make_term(pi, lam, 2 * k1, variant.flipped, not variant.needs_quad)
    return _mc(term, samples, [seed, 9, k1, k2, _VARIANT_CODES[variant]])


def _pair_family(k1: int, k2: int) -> list[Partition]:
    return [pi for pi in enumerate_cross_matched(k1, k2) if len(cross_blocks(pi, k1)) >= 4]


def _side_blocks_dp(pi: Partition, k1: int) -> bool:
    split = 2 * k1
    return all(block_parity(b) is Parity.DIFFERENT for b in pi.blocks if b[-1] <= split or b[0] > split)


def _quad_sides(pi: Partition, k1: int) -> tuple[Parity, Parity]:
    quad = next(b for b in pi.blocks if len(b) == 4)
    r1, s1, r2, s2 = quad

    def par(a, b):
        return Parity.SAME if (a - b) % 2 == 0 else Parity.DIFFERENT

    return par(r1, s1), par(r2, s2)


@dataclass(frozen=True)
class _Weighted:
    family: str
    variant: Variant
    parts: tuple[Partition, ...]
    weight: float
    cross: tuple[int, ...]  # number of straddling elements per partition, for time weights


def _cov_terms(kind: EnsembleKind, k1: int, k2: int, kappa: float) -> list[_Weighted]:
    """Weighted integral families whose sum is the limit covariance."""
    pairs = _pair_family(k1, k2)
    quads = enumerate_p24(k1, k2)

    def cross(ps):
        return tuple(len(cross_blocks(pi, k1)) for pi in ps)

    def w(family, variant, ps, weight):
        ps = tuple(ps)
        return _Weighted(family, variant, ps, weight, cross(ps) if family == "pair" else (2,) * len(ps))

    if kind is EnsembleKind.SYMMETRIC:
        return [
            w("pair", Variant.I_MINUS, pairs, 1.0),
            w("pair", Variant.I_PLUS, pairs, 1.0),
            w("quad", Variant.II_MINUS, quads, kappa - 1.0),
            w("quad", Variant.II_PLUS, quads, kappa - 1.0),
        ]
    if kind is EnsembleKind.HERMITIAN:
        return [
            w("pair", Variant.I_MINUS, pairs, 1.0),
            w("quad", Variant.II_MINUS, quads, kappa - 1.0),
            w("quad", Variant.II_PLUS, quads, kappa - 1.0),
        ]
    # non-symmetric: a_j and a_{-j} are independent, so blocks must match by value
    inner_dp = [pi for pi in pairs if _side_blocks_dp(pi, k1)]
    straddle = [[block_parity(b) for b in cross_blocks(pi, k1)] for pi in inner_dp]
    pairs_minus = [pi for pi, ps in zip(inner_dp, straddle) if all(p is Parity.DIFFERENT for p in ps)]
    pairs_plus = [pi for pi, ps in zip(inner_dp, straddle) if all(p is Parity.SAME for p in ps)]
    quad_inner_dp = [pi for pi in quads if _side_blocks_dp(pi, k1)]
    quads_dd = [pi for pi in quad_inner_dp if _quad_sides(pi, k1) == (Parity.DIFFERENT, Parity.DIFFERENT)]
    quads_ss = [pi for pi in quad_inner_dp if _quad_sides(pi, k1) == (Parity.SAME, Parity.SAME)]
    return [
        w("pair", Variant.I_MINUS, pairs_minus, 1.0),
        w("pair", Variant.I_PLUS, pairs_plus, 1.0),
        w("quad", Variant.II_MINUS, quads_dd, kappa - 1.0),
        w("quad", Variant.II_MINUS, quads_ss, 1.0),
        w("quad", Variant.II_PLUS, quads_ss, 1.0),
    ]


def _family_estimates(group: _Weighted, k1: int, k2: int, lam: float, samples: int, seed: int):
    # estimates are computed over the full family so partition indices (and seeds) are stable
    full = _pair_family(k1, k2) if group.family == "pair" else enumerate_p24(k1, k2)
    index = {pi: i for i, pi in enumerate(full)}
    ests = _estimate_family(group.family, full, group.variant, k1, k2, lam, samples, seed)
    return [ests[index[pi]] for pi in group.parts]


def _predict_cov(kind: EnsembleKind, k1: int, k2: int, lam: float, kappa: float,
                 samples: int | None, seed: int, time_weight=None) -> IntegralEstimate:
    _check_pair(k1, k2)
    if kappa < 1.0:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    samples = samples or default_samples(k1, k2)
    ests, weights = [], []
    for group in _cov_terms(kind, k1, k2, kappa):
        if not group.parts or group.weight == 0.0:
            continue
        fam = _family_estimates(group, k1, k2, lam, samples, seed)
        for e, c in zip(fam, group.cross):
            ests.append(e)
            weights.append(group.weight * (time_weight(c // 2) if time_weight else 1.0))
    if not ests:
        return IntegralEstimate(0.0, 0.0, samples, seed)
    return _kahan_total(ests, weights, seed)


def predict_cov_sym(k1, k2, lam, kappa, samples=None, seed=0) -> IntegralEstimate:
    return _predict_cov(EnsembleKind.SYMMETRIC, k1, k2, lam, kappa, samples, seed)


def predict_cov_nonsym(k1, k2, lam, kappa, samples=None, seed=0) -> IntegralEstimate:
    return _predict_cov(EnsembleKind.NON_SYMMETRIC, k1, k2, lam, kappa, samples, seed)


def predict_cov_hermitian(k1, k2, lam, kappa, samples=None, seed=0) -> IntegralEstimate:
    return _predict_cov(EnsembleKind.HERMITIAN, k1, k2, lam, kappa, samples, seed)


def predict_cov(kind: EnsembleKind | str, k1, k2, lam, kappa, samples=None, seed=0) -> IntegralEstimate:
    return _predict_cov(EnsembleKind(kind), k1, k2, lam, kappa, samples, seed)


def predict_var_Q(Q: TestFunction, lam, kappa, kind: EnsembleKind | str, samples=None, seed=0) -> IntegralEstimate:
    """Limit variance of the centered trace of Q(TT'); constants drop out."""
    coeffs = Q.coefficients
    ests, weights = [], []
    for j1 in range(1, len(coeffs)):
        for j2 in range(1, len(coeffs)):
            c = coeffs[j1] * coeffs[j2]
            if c == 0.0:
                continue
            a, b = min(j1, j2), max(j1, j2)
            ests.append(predict_cov(kind, a, b, lam, kappa, samples, seed))
            weights.append(c)
    if not ests:
        return IntegralEstimate(0.0, 0.0, samples or 0, seed)
    # terms share partition estimates, so errors are combined conservatively (linearly)
    value = math.fsum(w * e.value for w, e in zip(weights, ests))
    se = math.fsum(abs(w) * e.std_error for w, e in zip(weights, ests))
    return IntegralEstimate(value, se, sum(e.samples for e in ests), seed)


def predict_cov_process(k1, k2, t1, t2, lam, kind: EnsembleKind | str = EnsembleKind.SYMMETRIC,
                        samples=None, seed=0) -> IntegralEstimate:
    """Limit Cov(w_k1(t1), w_k2(t2)) when entries follow Brownian motions, t1 <= t2.

    A term whose partition has ``c`` straddling elements picks up
    ``t1^(k1 + c/2) * t2^(k2 - c/2)``: straddling and first-trace pairs see
    ``t1``, second-trace pairs see ``t2``.  Gaussian increments fix the fourth
    moment at 3 (real) or 2 (complex entries scaled by 1/sqrt(2)).
    """
    if t1 < 0 or t2 < 0:
        raise ValueError("times must be nonnegative")
    if t1 > t2:
        raise ValueError(f"need t1 <= t2, got t1={t1}, t2={t2}")
    kind = EnsembleKind(kind)
    kappa = 2.0 if kind is EnsembleKind.HERMITIAN else 3.0
    if t1 == 0:
        return IntegralEstimate(0.0, 0.0, samples or default_samples(k1, k2), seed)

    def weight(h):
        return t1 ** (k1 + h) * t2 ** (k2 - h)

    return _predict_cov(kind, k1, k2, lam, kappa, samples, seed, time_weight=weight)


# ---------------------------------------------------------------------------
# export

@dataclass(frozen=True)
class EstimateRecord:
    family: str
    k1: int
    k2: int
    lam: float
    kappa: float | None
    variant: str | None
    value: float
    std_error: float
    samples: int
    seed: int

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in ("family", "k1", "k2", "lambda", "kappa", "variant",
                                  "value", "std_error", "samples", "seed")}

    @staticmethod
    def from_json(d: dict) -> "EstimateRecord":
        d = dict(d)
        d["lam"] = d.pop("lambda")
        return EstimateRecord(**d)


def cache_records() -> list[EstimateRecord]:
    """Per-partition cache contents as exportable records, in a stable order."""
    out = []
    with CACHE.lock:
        items = sorted(CACHE.entries.items(), key=lambda kv: tuple(str(x) for x in kv[0]))
    for (family, k1, k2, lam, variant, samples, seed, idx), est in items:
        out.append(EstimateRecord(f"{family}[{idx}]", k1, k2, float(lam), None,
                                  variant.value if variant else None, est.value, est.std_error,
                                  est.samples, seed))
    return out


def dump_cache(path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json() for r in cache_records()], fh, indent=1)
