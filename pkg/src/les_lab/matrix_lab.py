"""Random rectangular Toeplitz ensembles, trace powers and the walk-sum oracle.

A Toeplitz matrix T of size n x p has entry (i, j) = a_{i-j} / sqrt(n).  The
offsets run from -(p-1) to n-1 and are stored in a flat array at position
``offset + p - 1``.

Each replicate draws its entries from its own RNG stream, keyed by
(seed, stream tag, replicate index), so results never depend on how
replicates are spread over worker threads.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.linalg import toeplitz

from .limit_integrals import EnsembleKind, TestFunction
from .partitions import BudgetError

MAX_TRACE_POWER = 12
ORACLE_BUDGET = 10**8
GRAM_PATH_MAX_K = 4

# stream tags keep the static, process and diagonal draws apart
_STATIC, _PROCESS, _DIAGONAL = 1, 2, 3

_workers = 1


def set_workers(n: int):
    """Thread count for replicate fan-out; samples do not depend on it."""
    global _workers
    _workers = max(1, int(n))


class Family(str, Enum):
    RADEMACHER = "rademacher"
    GAUSSIAN = "gaussian"
    UNIFORM_SCALED = "uniform_scaled"
    COMPLEX_GAUSSIAN = "complex_gaussian"


class DiagonalMode(str, Enum):
    ZERO = "zero"
    RANDOM = "random"


@dataclass(frozen=True)
class EntryDistribution:
    """Mean-zero, unit (absolute) variance entry law."""

    family: Family

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))

    @property
    def kappa(self) -> float:
        return {Family.RADEMACHER: 1.0, Family.GAUSSIAN: 3.0,
                Family.UNIFORM_SCALED: 9.0 / 5.0, Family.COMPLEX_GAUSSIAN: 2.0}[self.family]

    @property
    def is_complex(self) -> bool:
        return self.family is Family.COMPLEX_GAUSSIAN

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        f = self.family
        if f is Family.RADEMACHER:
            return rng.integers(0, 2, size=size).astype(float) * 2.0 - 1.0
        if f is Family.GAUSSIAN:
            return rng.standard_normal(size)
        if f is Family.UNIFORM_SCALED:
            return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
        z = rng.standard_normal((2, size))
        return (z[0] + 1j * z[1]) / math.sqrt(2.0)

    def moment(self, power: int) -> float:
        """E[a^power] for the real families."""
        if power % 2:
            return 0.0
        f = self.family
        if f is Family.RADEMACHER:
            return 1.0
        if f is Family.GAUSSIAN:
            return float(math.prod(range(power - 1, 0, -2))) if power else 1.0
        if f is Family.UNIFORM_SCALED:
            return 3.0 ** (power / 2) / (power + 1)
        raise ValueError("use complex_moment for the complex family")

    def complex_moment(self, plain: int, conj: int) -> float:
        """E[a^plain * conj(a)^conj] for the circular complex Gaussian."""
        return float(math.factorial(plain)) if plain == conj else 0.0


@dataclass(frozen=True)
class EnsembleSpec:
    kind: EnsembleKind
    n: int
    p: int
    entry_dist: EntryDistribution
    diagonal_mode: DiagonalMode = DiagonalMode.ZERO

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind(self.kind))
        object.__setattr__(self, "diagonal_mode", DiagonalMode(self.diagonal_mode))
        if self.n < 1 or self.p < 1:
            raise ValueError(f"n and p must be positive, got n={self.n}, p={self.p}")
        if (self.kind is EnsembleKind.HERMITIAN) != self.entry_dist.is_complex:
            raise ValueError(f"{self.kind.value} ensemble cannot use {self.entry_dist.family.value} entries")
        if self.kind is EnsembleKind.HERMITIAN and self.diagonal_mode is DiagonalMode.RANDOM:
            raise ValueError("random diagonal is supported for real ensembles only")

    @property
    def lam(self) -> float:
        return self.p / self.n

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-(self.p - 1), self.n)

    @staticmethod
    def from_lambda(kind, n: int, lam: float, family, diagonal_mode=DiagonalMode.ZERO) -> "EnsembleSpec":
        p = int(round(lam * n))
        if p < 1:
            raise ValueError(f"p = round({lam} * {n}) must be >= 1")
        return EnsembleSpec(EnsembleKind(kind), n, p, EntryDistribution(Family(family)), DiagonalMode(diagonal_mode))


def _offset_values(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """Entries a_j for j = -(p-1)..n-1 with a_0 = 0, honoring the reflection rule."""
    n, p = spec.n, spec.p
    dist = spec.entry_dist
    out = np.zeros(n + p - 1, dtype=complex if dist.is_complex else float)
    zero = p - 1
    if spec.kind is EnsembleKind.NON_SYMMETRIC:
        out[zero + 1:] = dist.draw(rng, n - 1)
        out[:zero] = dist.draw(rng, p - 1)[::-1]
        return out
    half = dist.draw(rng, max(n, p) - 1)  # a_1, a_2, ...
    out[zero + 1:] = half[: n - 1]
    neg = half[: p - 1]
    if spec.kind is EnsembleKind.HERMITIAN:
        neg = np.conj(neg)
    out[:zero] = neg[::-1]
    return out


def _replicate_rng(seed: int, tag: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), tag, replicate]))


def _diagonal_draw(spec: EnsembleSpec, seed: int, replicate: int) -> float:
    # separate stream so switching the diagonal mode leaves the off-diagonal draw unchanged
    return float(spec.entry_dist.draw(_replicate_rng(seed, _DIAGONAL, replicate), 1)[0])


def draw_entries(spec: EnsembleSpec, seed: int, replicate: int = 0) -> np.ndarray:
    """Offset-indexed entries for one replicate (including a_0 if random)."""
    a = _offset_values(spec, _replicate_rng(seed, _STATIC, replicate))
    if spec.diagonal_mode is DiagonalMode.RANDOM:
        a[spec.p - 1] = _diagonal_draw(spec, seed, replicate)
    return a


def toeplitz_from_entries(a: np.ndarray, n: int, p: int) -> np.ndarray:
    """n x p matrix with (i, j) entry a_{i-j} / sqrt(n)."""
    zero = p - 1
    first_col = a[zero: zero + n]
    first_row = a[zero::-1][:p]
    return toeplitz(first_col, first_row) / math.sqrt(n)


def build_matrix(spec: EnsembleSpec, seed: int, replicate: int = 0) -> np.ndarray:
    return toeplitz_from_entries(draw_entries(spec, seed, replicate), spec.n, spec.p)


def identity_like(n: int, p: int) -> np.ndarray:
    return np.eye(n, p)


def trace_powers(T: np.ndarray, kmax: int, method: str = "auto") -> np.ndarray:
    """[Tr (TT*)^k for k = 1..kmax] via Gram powers or singular values."""
    if kmax < 1 or kmax > MAX_TRACE_POWER:
        raise BudgetError(f"kmax must be in [1, {MAX_TRACE_POWER}], got {kmax}")
    T = np.asarray(T)
    if not np.all(np.isfinite(T)):
        raise FloatingPointError("matrix has non-finite entries")
    if method == "auto":
        method = "gram" if kmax <= GRAM_PATH_MAX_K else "svd"
    if method == "svd":
        s2 = np.linalg.svd(T, compute_uv=False) ** 2
        return np.array([float(np.sum(s2**k)) for k in range(1, kmax + 1)])
    if method != "gram":
        raise ValueError(f"unknown method {method!r}")
    out = np.empty(kmax)
    out[0] = float(np.sum(np.abs(T) ** 2))  # Frobenius: exact sum of squares
    if kmax == 1:
        return out
    # the smaller Gram matrix has the same nonzero spectrum
    G = T @ T.conj().T if T.shape[0] <= T.shape[1] else T.conj().T @ T
    out[1] = float(np.sum(np.abs(G) ** 2))
    half = G
    for k in range(3, kmax + 1):
        # Tr G^k = <G^{floor(k/2)}, G^{ceil(k/2)}> with Hermitian powers
        if k % 2 == 1:
            other = half @ G
            out[k - 1] = float(np.real(np.vdot(half, other)))
        else:
            half = half @ G
            out[k - 1] = float(np.sum(np.abs(half) ** 2))
    return out


def offset_counts(n: int, p: int) -> np.ndarray:
    """Number of matrix cells on each diagonal offset -(p-1)..n-1."""
    j = np.arange(-(p - 1), n)
    return np.minimum(n - np.maximum(j, 0), p + np.minimum(j, 0)).astype(float)


def _first_trace(a: np.ndarray, counts: np.ndarray, n: int) -> float:
    # Tr(TT*) = sum_j |a_j|^2 * (cells on diagonal j) / n, without forming T
    return float(np.dot(counts, np.abs(a) ** 2)) / n


def schatten_norm(T: np.ndarray, r2: int) -> float:
    """(Tr (TT*)^r)^(1/2r) for r2 = 2r."""
    if r2 < 2 or r2 % 2:
        raise ValueError(f"order must be an even positive integer, got {r2}")
    r = r2 // 2
    return float(max(trace_powers(T, r)[r - 1], 0.0) ** (1.0 / r2))


# ---------------------------------------------------------------------------
# walk-sum oracle

def _walks(n: int, p: int, k: int):
    """Yield (offsets j_1..j_2k) of every closed walk row -> col -> row ... -> start.

    Position after step q is start + sum_{l<=q} (-1)^l j_l; odd steps land on
    columns [1, p], even steps on rows [1, n].  Only the first 2k-1 offsets are
    free; the closure fixes the last.
    """
    lo, hi = -(p - 1), n - 1
    js = [0] * (2 * k)

    def rec(q, pos, start):
        if q == 2 * k:
            last = start - pos  # (-1)^{2k} j_2k brings the walk home
            if lo <= last <= hi:
                js[q - 1] = last
                yield tuple(js)
            return
        sign = -1 if q % 2 == 1 else 1
        upper = p if q % 2 == 1 else n
        for j in range(lo, hi + 1):
            nxt = pos + sign * j
            if 1 <= nxt <= upper:
                js[q - 1] = j
                yield from rec(q + 1, nxt, start)

    for i in range(1, n + 1):
        for walk in rec(1, i, i):
            yield walk


def _check_oracle_budget(n: int, p: int, k: int):
    cost = (n + p - 1) ** (2 * k - 1)
    if cost > ORACLE_BUDGET:
        raise BudgetError(f"(n+p-1)^(2k-1) = {cost} exceeds the oracle budget {ORACLE_BUDGET}")


def trace_formula_oracle(entries, n: int, p: int, k: int, hermitian: bool = False) -> float:
    """Tr (TT*)^k summed walk by walk from the entry values.

    ``entries`` maps each offset j in -(p-1)..n-1 to a_j (a dict, or an array
    in the flat offset layout).  For complex entries every second factor is
    conjugated.
    """
    _check_oracle_budget(n, p, k)
    if isinstance(entries, dict):
        get = entries.__getitem__
    else:
        arr = np.asarray(entries)
        get = lambda j: arr[j + p - 1]  # noqa: E731
    total = 0.0 + 0.0j
    for walk in _walks(n, p, k):
        prod = 1.0 + 0.0j
        for q, j in enumerate(walk, start=1):
            v = get(j)
            prod *= np.conj(v) if (hermitian and q % 2 == 0) else v
        total += prod
    total /= n**k
    return float(total.real)


def expected_trace(spec: EnsembleSpec, k: int) -> float:
    """Exact E Tr (TT*)^k by averaging each walk's product over the entry law."""
    _check_oracle_budget(spec.n, spec.p, k)
    dist = spec.entry_dist
    total = 0.0
    for walk in _walks(spec.n, spec.p, k):
        counts: dict[int, list[int]] = {}
        zero_diag = False
        for q, j in enumerate(walk, start=1):
            if j == 0 and spec.diagonal_mode is DiagonalMode.ZERO:
                zero_diag = True
                break
            if spec.kind is EnsembleKind.NON_SYMMETRIC:
                key, conj = j, False
            else:
                key = abs(j)
                # a_{-j} = conj(a_j); every second factor is conjugated again
                conj = (j < 0) != (q % 2 == 0) if spec.kind is EnsembleKind.HERMITIAN else False
            c = counts.setdefault(key, [0, 0])
            c[1 if conj else 0] += 1
        if zero_diag:
            continue
        term = 1.0
        for key, (plain, conj) in counts.items():
            if dist.is_complex and key != 0:
                term *= dist.complex_moment(plain, conj)
            else:
                term *= dist.moment(plain + conj)
            if term == 0.0:
                break
        total += term
    return total / spec.n**k


def expected_first_trace(spec: EnsembleSpec) -> float:
    """E Tr(TT*) = (np - min(n,p) [zero diagonal]) / n."""
    n, p = spec.n, spec.p
    diag = 0 if spec.diagonal_mode is DiagonalMode.RANDOM else min(n, p)
    return (n * p - diag) / n


# ---------------------------------------------------------------------------
# Hankel

def backward_identity(n: int) -> np.ndarray:
    return np.eye(n)[::-1]


@dataclass(frozen=True)
class HankelCheck:
    passed: bool
    max_deviation: float
    threshold: float


def hankel_spectrum_check(spec: EnsembleSpec, seed: int, T: np.ndarray | None = None) -> HankelCheck:
    """Compare sorted eigenvalues of HH' and TT' with H the row-reversed T."""
    if spec.kind is not EnsembleKind.NON_SYMMETRIC:
        raise ValueError("Hankel check applies to the non-symmetric ensemble")
    if T is None:
        T = build_matrix(spec, seed)
    H = backward_identity(spec.n) @ T
    ev_t = np.sort(np.linalg.eigvalsh(T @ T.T))
    ev_h = np.sort(np.linalg.eigvalsh(H @ H.T))
    dev = float(np.max(np.abs(ev_t - ev_h))) if ev_t.size else 0.0
    thr = 1e-10 * (1.0 + float(ev_t[-1]) if ev_t.size else 1.0)
    return HankelCheck(dev <= thr, dev, thr)


# ---------------------------------------------------------------------------
# fluctuation samples

@dataclass
class FluctuationSample:
    label: str  # "k=2", "Q=..." etc.
    values: np.ndarray
    centering: str
    spec: EnsembleSpec
    seed: int
    time: float | None = None
    raw_mean: float = 0.0  # mean of the uncentered trace statistic
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise FloatingPointError(f"non-finite values in sample {self.label}")

    @property
    def replicates(self) -> int:
        return int(self.values.size)


def _map_ordered(fn, count: int) -> list:
    if _workers == 1 or count < 2:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=_workers) as pool:
        return list(pool.map(fn, range(count)))


def _replicate_traces(spec: EnsembleSpec, kmax: int, seed: int, r: int) -> np.ndarray:
    a = draw_entries(spec, seed, r)
    if kmax == 1:
        return np.array([_first_trace(a, offset_counts(spec.n, spec.p), spec.n)])
    return trace_powers(toeplitz_from_entries(a, spec.n, spec.p), kmax)


@lru_cache(maxsize=64)
def _cached_traces(spec: EnsembleSpec, kmax: int, replicates: int, seed: int) -> np.ndarray:
    rows = _map_ordered(lambda r: _replicate_traces(spec, kmax, seed, r), replicates)
    out = np.vstack(rows)
    out.setflags(write=False)
    return out


def clear_sample_cache():
    _cached_traces.cache_clear()
    _cached_process.cache_clear()


def sample_traces(spec: EnsembleSpec, kmax: int, replicates: int, seed: int) -> np.ndarray:
    """Raw traces, shape (replicates, kmax); column k-1 holds Tr (TT*)^k."""
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    if kmax < 1 or kmax > MAX_TRACE_POWER:
        raise BudgetError(f"kmax must be in [1, {MAX_TRACE_POWER}], got {kmax}")
    return _cached_traces(spec, kmax, replicates, seed)


def _q_label(Q: TestFunction) -> str:
    return "Q=" + "+".join(f"{c:g}*x^{j}" for j, c in enumerate(Q.coefficients) if c != 0.0)


def _center(raw: np.ndarray, n: int, centering: str, exact_mean: float | None):
    if centering == "sample_mean":
        mean = float(np.mean(raw))
        vals = (raw - mean) / math.sqrt(n)
        return vals - np.mean(vals), mean  # pin the sample mean to 0 up to rounding
    if centering == "oracle_mean":
        return (raw - exact_mean) / math.sqrt(n), float(np.mean(raw))
    raise ValueError(f"unknown centering {centering!r}")


def sample_w(spec: EnsembleSpec, k_or_Q: int | TestFunction, replicates: int, seed: int,
             centering: str = "sample_mean") -> FluctuationSample:
    """Centered, 1/sqrt(n)-scaled trace statistic of TT* (power k or polynomial Q)."""
    if isinstance(k_or_Q, TestFunction):
        coeffs = np.array(k_or_Q.coefficients)
        kmax = max(k_or_Q.degree, 1)
        traces = sample_traces(spec, kmax, replicates, seed)
        raw = traces @ coeffs[1: kmax + 1] if coeffs.size > 1 else np.zeros(replicates)
        raw = raw + coeffs[0] * min(spec.n, spec.p) if coeffs.size else raw
        label = _q_label(k_or_Q)
        exact = None
        if centering == "oracle_mean":
            exact = coeffs[0] * min(spec.n, spec.p) + sum(
                coeffs[j] * expected_trace(spec, j) for j in range(1, kmax + 1) if coeffs[j] != 0.0)
    else:
        k = int(k_or_Q)
        raw = sample_traces(spec, k, replicates, seed)[:, k - 1]
        label = f"k={k}"
        exact = expected_trace(spec, k) if centering == "oracle_mean" else None
    vals, mean = _center(np.asarray(raw, dtype=float), spec.n, centering, exact)
    return FluctuationSample(label, vals, centering, spec, seed, raw_mean=mean)


def sample_nonzero_diag(spec: EnsembleSpec, k: int, replicates: int, seed: int) -> FluctuationSample:
    """w_k for T + (a_0/sqrt(n)) I, with a_0 drawn from the entry law per replicate."""
    if spec.diagonal_mode is not DiagonalMode.RANDOM:
        raise ValueError("sample_nonzero_diag needs diagonal_mode='random'")
    return sample_w(spec, k, replicates, seed)


def diagonal_draws(spec: EnsembleSpec, replicates: int, seed: int) -> np.ndarray:
    """The a_0 values used by sample_nonzero_diag, replicate by replicate."""
    return np.array([_diagonal_draw(spec, seed, r) for r in range(replicates)])


# ---------------------------------------------------------------------------
# Brownian entries

@dataclass(frozen=True)
class BrownianPathSpec:
    times: tuple[float, ...]

    def __post_init__(self):
        t = tuple(float(x) for x in self.times)
        object.__setattr__(self, "times", t)
        if not t:
            raise ValueError("time grid is empty")
        if t[0] < 0 or any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"times must be nonnegative and strictly increasing, got {t}")

    def increments(self) -> np.ndarray:
        return np.diff((0.0,) + self.times)


def _brownian_entries(spec: EnsembleSpec, path: BrownianPathSpec, seed: int, r: int) -> np.ndarray:
    """Offset-indexed entry paths, shape (len(times), n+p-1), real or complex."""
    rng = _replicate_rng(seed, _PROCESS, r)
    # a standard-normal draw per time step, scaled by sqrt(dt); complex family keeps E|Z(t)|^2 = t
    steps = [_offset_values(spec, rng) * math.sqrt(dt) for dt in path.increments()]
    paths = np.cumsum(np.vstack(steps), axis=0)
    if spec.diagonal_mode is DiagonalMode.RANDOM:
        diag_rng = _replicate_rng(seed, _DIAGONAL, r)
        b0 = np.cumsum(diag_rng.standard_normal(len(path.times)) * np.sqrt(path.increments()))
        paths[:, spec.p - 1] = b0
    return paths


@lru_cache(maxsize=16)
def _cached_process(spec: EnsembleSpec, k: int, path: BrownianPathSpec, replicates: int, seed: int) -> np.ndarray:
    counts = offset_counts(spec.n, spec.p)

    def one(r):
        paths = _brownian_entries(spec, path, seed, r)
        if k == 1:
            return np.array([_first_trace(a, counts, spec.n) for a in paths])
        return np.array([trace_powers(toeplitz_from_entries(a, spec.n, spec.p), k)[k - 1] for a in paths])

    out = np.vstack(_map_ordered(one, replicates))
    out.setflags(write=False)
    return out


def sample_w_process(spec: EnsembleSpec, k: int, path: BrownianPathSpec, replicates: int,
                     seed: int) -> list[FluctuationSample]:
    """w_k(t) at every grid time, sharing one Brownian entry path per replicate.

    The Gaussian law is implied by Brownian increments; ``spec.entry_dist``
    only selects real (Gaussian) or complex entries.
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    if spec.entry_dist.family not in (Family.GAUSSIAN, Family.COMPLEX_GAUSSIAN):
        raise ValueError("Brownian entries are Gaussian; use the gaussian or complex_gaussian family")
    raw = _cached_process(spec, k, path, replicates, seed)
    out = []
    for col, t in enumerate(path.times):
        vals, mean = _center(raw[:, col], spec.n, "sample_mean", None)
        out.append(FluctuationSample(f"k={k}", vals, "sample_mean", spec, seed, time=t, raw_mean=mean))
    return out


# ---------------------------------------------------------------------------
# export

def write_samples_csv(samples: Sequence[FluctuationSample], path) -> None:
    """Columns replicate, k_or_Q, value, time (blank for static samples)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["replicate", "k_or_Q", "value", "time"])
        for s in samples:
            t = "" if s.time is None else repr(float(s.time))
            for r, v in enumerate(s.values):
                w.writerow([r, s.label, repr(float(v)), t])


def with_diagonal(spec: EnsembleSpec, mode: DiagonalMode | str) -> EnsembleSpec:
    return replace(spec, diagonal_mode=DiagonalMode(mode))
