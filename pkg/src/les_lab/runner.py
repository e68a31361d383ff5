"""Experiment configs: validation, dispatch and artifact writing.

A config is a JSON object with at least ``id``, ``kind`` and ``seed``; the
remaining fields depend on the kind (see ``_SCHEMAS``).  Ensembles are given
by ``{"kind", "n", "lambda", "family"[, "diagonal_mode"]}`` and ``p`` is
derived as ``round(lambda * n)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Any, Callable

from . import fluctuation_stats as fs
from . import limit_integrals as li
from . import matrix_lab as ml
from .partitions import (
    BudgetError,
    count_cross_matched,
    count_dp_pair_partitions,
    count_p24,
    double_factorial,
    enumerate_cross_matched,
    enumerate_p24,
    enumerate_pair_partitions,
    is_dp_partition,
)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
MAX_N = 4096
MAX_REPLICATES = 100_000
MC_SAMPLE_CAP = 10_000_000


class ConfigError(ValueError):
    """Invalid experiment config; message names the field (and line if known)."""


# ---------------------------------------------------------------------------
# validation

_ENSEMBLE_FIELDS = {"kind": str, "n": int, "lambda": (int, float), "family": str}

_SCHEMAS: dict[str, dict[str, Any]] = {
    "partition_counts": {"max_r": int, "max_cross_sum": int, "max_quad_sum": int},
    "oracle_check": {"cases": list, "draws": int},
    "moments": {},
    "covariance": {"ensembles": list, "pairs": list, "replicates": int},
    "clt": {"ensembles": list, "replicates": int},
    "process": {"ensemble": dict, "k": int, "times": list, "replicates": int},
    "schatten": {"lambdas": list, "r": int, "n_grid": list, "limit_replicates": int,
                 "clt_n": int, "clt_replicates": int},
    "hankel_check": {"cases": list, "draws": int},
    "nonzero_diag": {"ensembles": list, "ks": list, "replicates": int},
}


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


def _fail(text, path: str, msg: str):
    key = path.split(".")[-1].split("[")[0]
    line = _line_of(text, key)
    where = f"line {line}, " if line else ""
    raise ConfigError(f"{where}field '{path}': {msg}")


def _require(cfg: dict, key: str, typ, text, prefix=""):
    path = f"{prefix}{key}"
    if key not in cfg:
        line = _line_of(text, prefix.rstrip(".").split(".")[-1].split("[")[0]) if prefix else None
        where = f"line {line}, " if line else ""
        raise ConfigError(f"{where}field '{path}': missing required field")
    val = cfg[key]
    if typ is int and (isinstance(val, bool) or not isinstance(val, int)):
        _fail(text, path, f"expected an integer, got {val!r}")
    if typ is not int and not isinstance(val, typ):
        _fail(text, path, f"expected {typ}, got {val!r}")
    return val


def _positive(text, path, v):
    if v <= 0:
        _fail(text, path, f"must be positive, got {v}")


def ensemble_from(d: dict, text=None, prefix="ensemble.") -> ml.EnsembleSpec:
    if not isinstance(d, dict):
        _fail(text, prefix.rstrip("."), "expected an object")
    for key, typ in _ENSEMBLE_FIELDS.items():
        _require(d, key, typ, text, prefix)
    n, lam = d["n"], float(d["lambda"])
    _positive(text, prefix + "n", n)
    _positive(text, prefix + "lambda", lam)
    if n > MAX_N:
        raise BudgetError(f"n = {n} exceeds the desk-scale cap {MAX_N}")
    try:
        kind = li.EnsembleKind(d["kind"])
    except ValueError:
        _fail(text, prefix + "kind", f"unknown ensemble kind {d['kind']!r}")
    try:
        fam = ml.Family(d["family"])
    except ValueError:
        _fail(text, prefix + "family", f"unknown entry family {d['family']!r}")
    mode = d.get("diagonal_mode", "zero")
    try:
        return ml.EnsembleSpec.from_lambda(kind, n, lam, fam, ml.DiagonalMode(mode))
    except ValueError as e:
        _fail(text, prefix.rstrip("."), str(e))


def validate(cfg: Any, text: str | None = None) -> dict:
    """Check a parsed config; returns it unchanged or raises ConfigError/BudgetError."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    _require(cfg, "id", str, text)
    kind = _require(cfg, "kind", str, text)
    _require(cfg, "seed", int, text)
    if kind not in _SCHEMAS:
        _fail(text, "kind", f"unknown experiment kind {kind!r}; expected one of {sorted(_SCHEMAS)}")
    for key, typ in _SCHEMAS[kind].items():
        _require(cfg, key, typ, text)
    for key in ("replicates", "limit_replicates", "clt_replicates", "draws"):
        if key in cfg:
            _positive(text, key, cfg[key])
            if cfg[key] > MAX_REPLICATES:
                raise BudgetError(f"{key} = {cfg[key]} exceeds the cap {MAX_REPLICATES}")
    mc = cfg.get("mc_samples")
    if mc is not None:
        if not isinstance(mc, int) or mc < li.MIN_SAMPLES:
            _fail(text, "mc_samples", f"must be an integer >= {li.MIN_SAMPLES}")
        if mc > MC_SAMPLE_CAP:
            raise BudgetError(f"mc_samples = {mc} exceeds the cap {MC_SAMPLE_CAP}")
    for i, e in enumerate(cfg.get("ensembles", [])):
        ensemble_from(e, text, f"ensembles[{i}].")
    if "ensemble" in cfg:
        ensemble_from(cfg["ensemble"], text)
    for key in ("pairs",):
        for i, pair in enumerate(cfg.get(key, [])):
            if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(k, int) and k >= 1 for k in pair)):
                _fail(text, f"{key}[{i}]", "expected [k1, k2] with positive integers")
            if 2 * sum(pair) > 16:
                raise BudgetError(f"pair {pair}: 2(k1+k2) exceeds the enumeration cap 16")
    if kind == "moments":
        if "ensembles" not in cfg and "first_moment" not in cfg:
            _fail(text, "ensembles", "moments config needs 'ensembles' or 'first_moment'")
        if "ensembles" in cfg:
            _require(cfg, "orders", list, text)
            _require(cfg, "replicates", int, text)
            for r in cfg["orders"]:
                if not isinstance(r, int) or r < 1:
                    _fail(text, "orders", f"orders must be positive integers, got {r!r}")
                if r > li.MAX_MOMENT_ORDER:
                    raise BudgetError(f"moment order {r} exceeds the cap {li.MAX_MOMENT_ORDER}")
    if kind == "oracle_check":
        for i, case in enumerate(cfg["cases"]):
            if not (isinstance(case, list) and len(case) == 3):
                _fail(text, f"cases[{i}]", "expected [n, p, k]")
            n, p, k = case
            if (n + p - 1) ** (2 * k - 1) > ml.ORACLE_BUDGET:
                raise BudgetError(f"oracle case {case} exceeds the budget (n+p-1)^(2k-1) <= {ml.ORACLE_BUDGET}")
    if kind == "partition_counts":
        if 2 * cfg["max_r"] > 16 or 2 * cfg["max_cross_sum"] > 16 or 2 * cfg["max_quad_sum"] > 16:
            raise BudgetError("partition enumeration exceeds the ground-set cap 16")
    if kind == "process":
        times = cfg["times"]
        if any(not isinstance(t, (int, float)) for t in times):
            _fail(text, "times", "times must be numbers")
    return cfg


# ---------------------------------------------------------------------------
# handlers

@dataclass
class RunResult:
    config: dict
    reports: list[fs.ExperimentReport] = field(default_factory=list)
    samples: list[ml.FluctuationSample] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def report_json(self) -> str:
        doc = {
            "id": self.config["id"],
            "verdict": "pass" if self.passed else "fail",
            "config": self.config,
            "reports": [r.to_json() for r in self.reports],
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"

    def summary_text(self) -> str:
        lines = [f"experiment {self.config['id']} ({self.config['kind']}): {'PASS' if self.passed else 'FAIL'}",
                 "id,predicted,empirical,tolerance,verdict"]
        for r in self.reports:
            lines.extend(r.csv_lines())
        return "\n".join(lines) + "\n"


def _mc(cfg) -> int | None:
    return cfg.get("mc_samples")


def _labelled(sample: ml.FluctuationSample, prefix: str) -> ml.FluctuationSample:
    s = ml.FluctuationSample(f"{prefix}/{sample.label}", sample.values, sample.centering, sample.spec,
                             sample.seed, sample.time, sample.raw_mean)
    return s


def _tag(spec: ml.EnsembleSpec) -> str:
    return f"{spec.kind.value}/{spec.entry_dist.family.value}"


def _brute_force_quads(k1: int, k2: int) -> int:
    """Count P_{2,4} by filtering every partition of the ground set into blocks of size 2 or 4."""
    m = 2 * (k1 + k2)
    split = 2 * k1

    def rec(rest):
        if not rest:
            yield []
            return
        first, others = rest[0], rest[1:]
        for size in (1, 3):
            for comp in combinations(others, size):
                block = (first,) + comp
                remaining = tuple(x for x in others if x not in comp)
                for tail in rec(remaining):
                    yield [block] + tail

    count = 0
    for blocks in rec(tuple(range(1, m + 1))):
        quads = [b for b in blocks if len(b) == 4]
        if len(quads) != 1:
            continue
        q = quads[0]
        if sum(x <= split for x in q) != 2:
            continue
        pairs = [b for b in blocks if len(b) == 2]
        if all((b[0] <= split) == (b[1] <= split) for b in pairs):
            count += 1
    return count


def _run_partition_counts(cfg, res: RunResult):
    checks = []

    def exact(name, predicted, observed):
        checks.append(fs.Check(name, predicted, 0.0, observed, 0.0, 0.0, predicted == observed))

    for r in range(1, cfg["max_r"] + 1):
        parts = enumerate_pair_partitions(2 * r)
        exact(f"P2({2 * r})", double_factorial(2 * r - 1), len(parts))
        exact(f"DP2({2 * r})", count_dp_pair_partitions(r), sum(is_dp_partition(p) for p in parts))
        if len(set(parts)) != len(parts):
            exact(f"P2({2 * r})_duplicates", 0, len(parts) - len(set(parts)))
    for s in range(2, cfg["max_cross_sum"] + 1):
        for k1 in range(1, s):
            k2 = s - k1
            exact(f"P2({2 * k1},{2 * k2})", count_cross_matched(k1, k2), len(enumerate_cross_matched(k1, k2)))
    for s in range(2, cfg["max_quad_sum"] + 1):
        for k1 in range(1, s):
            k2 = s - k1
            found = len(enumerate_p24(k1, k2))
            exact(f"P24({2 * k1},{2 * k2})_brute_force", _brute_force_quads(k1, k2), found)
            exact(f"P24({2 * k1},{2 * k2})_formula", count_p24(k1, k2), found)
    res.reports.append(fs.report_for("partition_counts", checks))


def _run_oracle(cfg, res: RunResult):
    checks = []
    kinds = cfg.get("kinds", [["symmetric", "rademacher"], ["non_symmetric", "gaussian"],
                              ["hermitian", "complex_gaussian"]])
    for kind, fam in kinds:
        for n, p, k in cfg["cases"]:
            spec = ml.EnsembleSpec(li.EnsembleKind(kind), n, p, ml.EntryDistribution(ml.Family(fam)))
            worst = 0.0
            for d in range(cfg["draws"]):
                a = ml.draw_entries(spec, cfg["seed"], d)
                direct = ml.trace_powers(ml.toeplitz_from_entries(a, n, p), k)[k - 1]
                walk = ml.trace_formula_oracle(a, n, p, k, hermitian=spec.kind is li.EnsembleKind.HERMITIAN)
                worst = max(worst, abs(walk - direct) / max(abs(direct), 1e-300))
            checks.append(fs.Check(f"{kind}/{fam}/n{n}_p{p}_k{k}_max_rel_dev", 0.0, 0.0, worst, 0.0,
                                   1e-10, worst <= 1e-10, {"draws": cfg["draws"]}))
    res.reports.append(fs.report_for("oracle_equivalence", checks))


def _run_moments(cfg, res: RunResult):
    seed = cfg["seed"]
    if "first_moment" in cfg:
        fm = cfg["first_moment"]
        checks = []
        samples = fm.get("mc_samples", 1_000_000)
        for lam in fm.get("lambdas", [0.5, 1.0, 2.0]):
            est = li.estimate_M(1, float(lam), samples, seed)
            ok, tol = fs.within(est.value, est.std_error, float(lam), 0.0, n_se=3.0)
            checks.append(fs.Check(f"M1(lambda={lam:g})", float(lam), 0.0, est.value, est.std_error, tol, ok))
        for e in fm.get("identity_ensembles", []):
            spec = ensemble_from(e)
            checks.append(fs.first_moment_identity_check(spec, fm["identity_replicates"], seed))
        rep = fs.report_for("first_moment", checks, seed=seed)
        rep.rule = "M1: |est - lambda| <= 3 SE; finite-n identity: 4 SE"
        res.reports.append(rep)
    if "ensembles" in cfg:
        checks = []
        for e in cfg["ensembles"]:
            spec = ensemble_from(e)
            for r in cfg["orders"]:
                checks.append(fs.moment_check(spec, r, cfg["replicates"], seed, _mc(cfg), seed,
                                              cfg.get("relative_tolerance", 0.05)))
        rep = fs.report_for("moment_match", checks, seed=seed, replicates=cfg["replicates"])
        rep.rule = "|emp - pred| <= max(5% of pred, 4 * sqrt(SE_emp^2 + SE_pred^2))"
        res.reports.append(rep)


def _pairs(cfg) -> list[tuple[int, int]]:
    return [tuple(p) for p in cfg["pairs"]]


def _run_covariance(cfg, res: RunResult):
    for e in cfg["ensembles"]:
        spec = ensemble_from(e)
        rep = fs.covariance_experiment(spec, _pairs(cfg), cfg["replicates"], cfg["seed"], _mc(cfg), cfg["seed"],
                                       cfg.get("gaussian_ks", []))
        res.reports.append(rep)
        kmax = max(max(p) for p in _pairs(cfg))
        for k in range(1, kmax + 1):
            res.samples.append(_labelled(ml.sample_w(spec, k, cfg["replicates"], cfg["seed"]), _tag(spec)))


def _run_clt(cfg, res: RunResult):
    seed, R = cfg["seed"], cfg["replicates"]
    for e in cfg["ensembles"]:
        spec = ensemble_from(e)
        checks = []
        for k in e.get("ks", cfg.get("ks", [])):
            s = ml.sample_w(spec, k, R, seed)
            checks.append(fs.gaussianity_as_check(f"{_tag(spec)}/gaussian_w{k}", s))
            res.samples.append(_labelled(s, _tag(spec)))
        if "Q" in cfg:
            Q = li.TestFunction(tuple(cfg["Q"]))
            checks.append(fs.polynomial_experiment(spec, Q, R, seed, _mc(cfg), seed))
            res.samples.append(_labelled(ml.sample_w(spec, Q, R, seed), _tag(spec)))
        res.reports.append(fs.report_for(f"clt/{_tag(spec)}", checks, replicates=R, seed=seed))


def _run_process(cfg, res: RunResult):
    spec = ensemble_from(cfg["ensemble"])
    rep = fs.process_cov_check(spec, cfg["k"], cfg["times"], cfg["replicates"], cfg["seed"], _mc(cfg), cfg["seed"])
    res.reports.append(rep)
    path = ml.BrownianPathSpec(tuple(cfg["times"]))
    for s in ml.sample_w_process(spec, cfg["k"], path, cfg["replicates"], cfg["seed"]):
        res.samples.append(_labelled(s, _tag(spec)))


def _run_schatten(cfg, res: RunResult):
    seed = cfg["seed"]
    kind = cfg.get("ensemble_kind", "symmetric")
    fam = cfg.get("family", "gaussian")
    for lam in cfg["lambdas"]:
        spec = ml.EnsembleSpec.from_lambda(kind, cfg["n_grid"][-1], float(lam), fam)
        res.reports.append(fs.schatten_limit_check(spec, cfg["r"], cfg["n_grid"], cfg["limit_replicates"],
                                                   seed, _mc(cfg), seed))
        clt_spec = ml.EnsembleSpec.from_lambda(kind, cfg["clt_n"], float(lam), fam)
        res.reports.append(fs.schatten_clt_check(clt_spec, cfg["r"], cfg["clt_replicates"], seed, _mc(cfg), seed))


def _run_hankel(cfg, res: RunResult):
    checks = []
    for n, p in cfg["cases"]:
        spec = ml.EnsembleSpec(li.EnsembleKind.NON_SYMMETRIC, n, p,
                               ml.EntryDistribution(ml.Family(cfg.get("family", "gaussian"))))
        worst, thr_min, ok = 0.0, math.inf, True
        for d in range(cfg["draws"]):
            chk = ml.hankel_spectrum_check(spec, cfg["seed"], ml.build_matrix(spec, cfg["seed"], d))
            worst = max(worst, chk.max_deviation)
            thr_min = min(thr_min, chk.threshold)
            ok &= chk.passed
        checks.append(fs.Check(f"hankel_n{n}_p{p}_max_abs_dev", 0.0, 0.0, worst, 0.0, thr_min, ok,
                               {"draws": cfg["draws"]}))
    res.reports.append(fs.report_for("hankel_spectrum", checks))


def _run_nonzero_diag(cfg, res: RunResult):
    for e in cfg["ensembles"]:
        spec = ensemble_from(e)
        ks = e.get("ks", cfg["ks"])
        for k in ks:
            res.reports.append(fs.nonzero_diag_check(spec, k, cfg["replicates"], cfg["seed"], _mc(cfg), cfg["seed"]))
            res.samples.append(_labelled(ml.sample_w(spec, k, cfg["replicates"], cfg["seed"]),
                                         _tag(spec) + "/diag"))


_HANDLERS: dict[str, Callable[[dict, RunResult], None]] = {
    "partition_counts": _run_partition_counts,
    "oracle_check": _run_oracle,
    "moments": _run_moments,
    "covariance": _run_covariance,
    "clt": _run_clt,
    "process": _run_process,
    "schatten": _run_schatten,
    "hankel_check": _run_hankel,
    "nonzero_diag": _run_nonzero_diag,
}


def run_config(cfg: dict, threads: int = 1) -> RunResult:
    validate(cfg)
    li.set_workers(threads)
    ml.set_workers(threads)
    res = RunResult(cfg)
    _HANDLERS[cfg["kind"]](cfg, res)
    return res


def write_artifacts(res: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(res.report_json(), encoding="utf-8")
    ml.write_samples_csv(res.samples, out_dir / "samples.csv")
    (out_dir / "summary.txt").write_text(res.summary_text(), encoding="utf-8")
    li.dump_cache(out_dir / "estimates.json")


# ---------------------------------------------------------------------------
# bundled suites

def _suite_root():
    return resources.files("les_lab") / "suites"


def list_suites() -> list[str]:
    root = _suite_root() / "acceptance"
    names = sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))
    return [f"acceptance/{n}" for n in names]


def load_config_text(ref: str) -> tuple[str, str]:
    """Return (text, origin) for a file path or a bundled suite name."""
    path = Path(ref)
    if path.is_file():
        return path.read_text(encoding="utf-8"), str(path)
    name = ref[:-5] if ref.endswith(".json") else ref
    candidate = _suite_root()
    parts = name.split("/")
    for part in parts[:-1]:
        candidate = candidate / part
    candidate = candidate / (parts[-1] + ".json")
    if candidate.is_file():
        return candidate.read_text(encoding="utf-8"), f"suite:{name}"
    raise ConfigError(f"config {ref!r} is neither a file nor a bundled suite")


def parse_config(text: str) -> dict:
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"line {e.lineno}, column {e.colno}: invalid JSON ({e.msg})") from None
    return validate(cfg, text)


def load_suite(name: str) -> dict:
    text, _ = load_config_text(name)
    return parse_config(text)

