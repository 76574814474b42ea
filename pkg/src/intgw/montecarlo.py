"""Replication engine for finite-sample studies and limit-theorem checks.

Replication ``r`` of an experiment with master seed ``s`` always draws its
path from stream ``(s, r, 0)``; results are assembled in replication order,
so every summary is bit-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from . import _kernels as K
from ._parallel import map_chunks
from ._validation import check_positive_int
from .cir import CirConfig, FUNCTIONAL_NAMES, sample_functionals
from .estimators import DegenerateDesignError, WeightScheme, _solve
from .exceptions import ConfigurationError, DomainError
from .model import ModelSpec, _fill, stationary_moments, simulate_path
from .rng import check_seed, replication_stream

SCHEMA_VERSION = 1

TABLE1_MUS = (0.4, 0.5, 0.8, 2.0, 3.0, 10.0)
TABLE1_NS = (100, 500)


@dataclass(frozen=True)
class ExperimentConfig:
    """Monte Carlo experiment.

    ``histogram_bins`` is either ``"fd"`` (Freedman-Diaconis width on the
    pooled sample of all estimators) or a number of equal-width bins >= 2.
    """

    spec: ModelSpec
    n: int
    B: int
    estimators: tuple = ("ols", "recip-t")
    master_seed: int = 0
    histogram_bins: int | str = "fd"

    def __post_init__(self):
        check_positive_int(self.n, "n")
        if self.n < 2:
            raise ConfigurationError("n must be >= 2 for estimation")
        check_positive_int(self.B, "B")
        check_seed(self.master_seed)
        schemes = tuple(WeightScheme.parse(s).kind for s in self.estimators)
        if not schemes:
            raise ConfigurationError("at least one estimator is required")
        object.__setattr__(self, "estimators", schemes)
        if self.histogram_bins != "fd":
            if check_positive_int(self.histogram_bins, "histogram_bins") < 2:
                raise ConfigurationError("histogram_bins must be >= 2")

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "n": self.n,
            "B": self.B,
            "estimators": list(self.estimators),
            "master_seed": self.master_seed,
            "histogram_bins": self.histogram_bins,
        }


@dataclass(frozen=True, eq=False)
class EstimatorSummary:
    sample_mean: float
    sample_variance: float
    bin_edges: np.ndarray
    counts: np.ndarray
    failure_count: int
    mu_hat: np.ndarray = field(repr=False)
    m_hat: np.ndarray = field(repr=False)

    @property
    def iqr(self) -> float:
        ok = self.mu_hat[np.isfinite(self.mu_hat)]
        q75, q25 = np.percentile(ok, [75, 25])
        return float(q75 - q25)

    def to_dict(self) -> dict:
        return {
            "sample_mean": self.sample_mean,
            "sample_variance": self.sample_variance,
            "m_hat_mean": _nanmean(self.m_hat),
            "failure_count": self.failure_count,
            "histogram": {"bin_edges": self.bin_edges.tolist(), "counts": self.counts.tolist()},
        }


@dataclass(frozen=True, eq=False)
class MCSummary:
    config: ExperimentConfig
    estimators: dict
    wall_clock_seconds: float

    def __getitem__(self, scheme: str) -> EstimatorSummary:
        return self.estimators[WeightScheme.parse(scheme).kind]

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "estimators": {k: v.to_dict() for k, v in self.estimators.items()},
        }
        if include_timing:
            d["wall_clock_seconds"] = self.wall_clock_seconds
        return d

    def to_json(self, path: str | Path, include_timing: bool = False) -> None:
        Path(path).write_text(json.dumps(self.to_dict(include_timing), indent=2) + "\n")

    def histogram_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["estimator", "bin_left", "bin_right", "count"])
            for name, s in self.estimators.items():
                for lo, hi, c in zip(s.bin_edges[:-1], s.bin_edges[1:], s.counts):
                    w.writerow([name, repr(float(lo)), repr(float(hi)), int(c)])


def _nanmean(a: np.ndarray) -> float:
    ok = a[np.isfinite(a)]
    return float(K.nsum(ok) / ok.size) if ok.size else math.nan


def _sample_var(a: np.ndarray) -> float:
    if a.size < 2:
        return math.nan
    mean = K.nsum(a) / a.size
    d = a - mean
    return float(K.nsum(d * d) / (a.size - 1))


def _replicate(spec: ModelSpec, n: int, B: int, seed: int, schemes, mu0: float | None, workers) -> dict:
    """Per-replication fits (and unit-root sums when ``mu0`` is given)."""
    schemes = [WeightScheme.parse(s) for s in schemes]
    recip = 1.0 / np.arange(1, n + 1, dtype=np.float64)
    ones = np.ones(n)

    def weights(scheme, x):
        if scheme.kind == "recip-t":
            return recip
        if scheme.kind == "ols":
            return ones
        return scheme.weights(x)

    def run(start, stop):
        buf = np.empty(n + 1, dtype=np.int64)
        mu = np.full((stop - start, len(schemes)), np.nan)
        m = np.full((stop - start, len(schemes)), np.nan)
        sums = np.full((stop - start, 8), np.nan) if mu0 is not None else None
        for i, r in enumerate(range(start, stop)):
            _fill(spec, replication_stream(seed, r), buf)
            x = buf[:-1].astype(np.float64)
            y = buf[1:].astype(np.float64)
            for j, sc in enumerate(schemes):
                try:
                    est = _solve(x, y, weights(sc, x), sc)
                except DegenerateDesignError:
                    continue
                mu[i, j] = est.mu_hat
                m[i, j] = est.m_hat
            if sums is not None:
                sums[i] = K.unit_root_sums(buf, mu0)
        return mu, m, sums

    parts = map_chunks(run, B, workers)
    out = {
        "mu": np.concatenate([p[0] for p in parts]),
        "m": np.concatenate([p[1] for p in parts]),
        "schemes": [s.kind for s in schemes],
    }
    if mu0 is not None:
        out["sums"] = np.concatenate([p[2] for p in parts])
    return out


def _histogram_edges(pooled: np.ndarray, bins) -> np.ndarray:
    if pooled.size == 0:
        return np.array([0.0, 0.5, 1.0])
    lo, hi = float(pooled.min()), float(pooled.max())
    if hi - lo <= 1e-12 * max(1.0, abs(lo)):
        return np.linspace(lo - 0.5, hi + 0.5, 3)
    if bins == "fd":
        edges = np.histogram_bin_edges(pooled, bins="fd")
        if edges.size - 1 > 1000:
            edges = np.histogram_bin_edges(pooled, bins=1000)
        if edges.size < 3:
            edges = np.linspace(lo, hi, 3)
        return edges
    return np.histogram_bin_edges(pooled, bins=int(bins))


def run_experiment(cfg: ExperimentConfig, workers: int | None = 1) -> MCSummary:
    """Simulate ``cfg.B`` paths and fit every requested estimator on each.

    Replications whose design is degenerate are excluded from the sample
    statistics and counted in ``failure_count``.
    """
    t0 = time.perf_counter()
    res = _replicate(cfg.spec, cfg.n, cfg.B, cfg.master_seed, cfg.estimators, None, workers)
    mu, m = res["mu"], res["m"]
    pooled = mu[np.isfinite(mu)]
    edges = _histogram_edges(pooled, cfg.histogram_bins)
    summaries = {}
    for j, name in enumerate(res["schemes"]):
        col = mu[:, j]
        ok = col[np.isfinite(col)]
        counts, _ = np.histogram(ok, bins=edges)
        summaries[name] = EstimatorSummary(
            sample_mean=float(K.nsum(ok) / ok.size) if ok.size else math.nan,
            sample_variance=_sample_var(ok),
            bin_edges=edges,
            counts=counts,
            failure_count=int(col.size - ok.size),
            mu_hat=col,
            m_hat=m[:, j],
        )
    return MCSummary(cfg, summaries, time.perf_counter() - t0)


def cell_seed(master_seed: int, cell: int) -> int:
    """Master seed of sub-experiment ``cell`` derived from ``master_seed``."""
    ss = np.random.SeedSequence([check_seed(master_seed), int(cell)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class Table1:
    mus: tuple
    ns: tuple
    values: np.ndarray
    B: int
    master_seed: int

    def cell(self, mu: float, n: int) -> float:
        return float(self.values[self.ns.index(n), self.mus.index(mu)])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n"] + [f"mu0={mu:g}" for mu in self.mus])
            for i, n in enumerate(self.ns):
                w.writerow([n] + [f"{v:.6f}" for v in self.values[i]])


def reproduce_table1(master_seed: int, B: int = 5000, workers: int | None = 1, mus=TABLE1_MUS, ns=TABLE1_NS) -> Table1:
    """Replication means of the 1/t intercept estimate for the Poisson INARCH model."""
    values = np.empty((len(ns), len(mus)))
    cell = 0
    for i, n in enumerate(ns):
        for j, mu in enumerate(mus):
            cfg = ExperimentConfig(ModelSpec.inarch(mu), n, B, ("recip-t",), cell_seed(master_seed, cell))
            values[i, j] = run_experiment(cfg, workers)["recip-t"].sample_mean
            cell += 1
    return Table1(tuple(mus), tuple(ns), values, B, master_seed)


@dataclass(frozen=True)
class ComparisonRecord:
    statistic: str
    empirical: float
    target: float
    stderr: float
    passed: bool


def write_records_csv(path: str | Path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["statistic", "empirical", "target", "stderr", "pass"])
        for r in records:
            w.writerow([r.statistic, repr(r.empirical), repr(r.target), repr(r.stderr), str(r.passed).lower()])


def _require_unit_root(spec: ModelSpec) -> None:
    if spec.m != 1.0:
        raise DomainError(f"unit-root check needs offspring mean 1, got {spec.m}")
    if spec.sigma2 <= 0:
        raise DomainError("limit theory is inapplicable with zero offspring variance (sigma2 = 0)")


def scaled_intercept_errors(spec: ModelSpec, n: int, B: int, seed: int, schemes=("recip-t",), workers=1) -> dict:
    """sqrt(ln n) (mu_hat - mu0) per replication for each scheme (NaN for failures)."""
    _require_unit_root(spec)
    res = _replicate(spec, n, B, check_seed(seed), schemes, None, workers)
    scale = math.sqrt(math.log(n))
    return {name: scale * (res["mu"][:, j] - spec.mu) for j, name in enumerate(res["schemes"])}


@dataclass(frozen=True)
class CltCheck:
    empirical_sd: float
    target_sd: float
    ks_stat: float
    ks_pvalue: float
    mean: float
    n: int
    B: int
    failures: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d


def clt_from_errors(z: np.ndarray, spec: ModelSpec, n: int) -> CltCheck:
    ok = z[np.isfinite(z)]
    target = math.sqrt(spec.sigma2 * spec.mu)
    ks = stats.kstest(ok, stats.norm(0.0, target).cdf)
    return CltCheck(
        empirical_sd=math.sqrt(_sample_var(ok)),
        target_sd=target,
        ks_stat=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        mean=float(K.nsum(ok) / ok.size),
        n=n,
        B=int(z.size),
        failures=int(z.size - ok.size),
    )


def verify_clt(spec: ModelSpec, n: int, B: int, seed: int, workers: int | None = 1) -> CltCheck:
    """Compare sqrt(ln n)(mu_tilde - mu0) with N(0, sigma0^2 mu0)."""
    z = scaled_intercept_errors(spec, n, B, seed, ("recip-t",), workers)["recip-t"]
    return clt_from_errors(z, spec, n)


@dataclass(frozen=True, eq=False)
class UnitRootSumsCheck:
    records: list
    ks: dict
    correlation_d_a: float
    discrete: np.ndarray = field(repr=False)
    limit: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "records": [asdict(r) for r in self.records],
            "ks": self.ks,
            "correlation_d_a": self.correlation_d_a,
        }


UNIT_ROOT_SUM_STATS = ("a", "b", "c", "d")


def unit_root_statistics(sums: np.ndarray, n: int) -> np.ndarray:
    """Normalised sums (a) (1/n) sum X/t, (b) (1/n^2) sum X^2/t, (c) (1/n) sum W X/t, (d) sum W/t / sqrt(ln n)."""
    return np.column_stack(
        (sums[:, 0] / n, sums[:, 1] / n**2, sums[:, 2] / n, sums[:, 3] / math.sqrt(math.log(n)))
    )


def verify_unit_root_sums(
    spec: ModelSpec,
    n: int,
    B: int,
    seed: int,
    limit_draws: int = 2000,
    grid_size: int = 1000,
    ks_threshold: float = 0.08,
    workers: int | None = 1,
) -> UnitRootSumsCheck:
    """Discrete normalised sums against draws of their CIR limits.

    The limit sample uses streams derived from ``cell_seed(seed, 1)`` so it
    is independent of the discrete replications.
    """
    _require_unit_root(spec)
    seed = check_seed(seed)
    res = _replicate(spec, n, B, seed, (), spec.mu, workers)
    D = unit_root_statistics(res["sums"], n)
    F = sample_functionals(CirConfig(spec.mu, math.sqrt(spec.sigma2), grid_size), limit_draws, cell_seed(seed, 1), workers)
    cols = [FUNCTIONAL_NAMES.index(c) for c in ("int_Y_over_s", "int_Y2_over_s", "stoch_int_Y32", "z_gauss")]
    L = F[:, cols]
    mu0, s2 = spec.mu, spec.sigma2
    records = [
        _mean_record("a: mean (1/n) sum X_{t-1}/t", D[:, 0], mu0),
        _mean_record("b: mean (1/n^2) sum X_{t-1}^2/t", D[:, 1], (mu0**2 + s2 * mu0 / 2) / 2),
        _mean_record("c: mean (1/n) sum W_t X_{t-1}/t", D[:, 2], 0.0),
        _var_record("d: var sum W_t/t / sqrt(ln n)", D[:, 3], s2 * mu0, rel_tol=0.25),
    ]
    ks = {}
    scale = math.sqrt((B + limit_draws) / (B * limit_draws))
    for k, name in enumerate(UNIT_ROOT_SUM_STATS):
        d = float(stats.ks_2samp(D[:, k], L[:, k]).statistic)
        ks[name] = d
        records.append(ComparisonRecord(f"{name}: two-sample KS vs limit", d, ks_threshold, scale, d < ks_threshold))
    corr = float(np.corrcoef(D[:, 3], D[:, 0])[0, 1])
    records.append(ComparisonRecord("e: corr(d, a)", corr, 0.0, 1.0 / math.sqrt(B), abs(corr) < 4.0 / math.sqrt(B)))
    return UnitRootSumsCheck(records, ks, corr, D, L)


def _mean_record(name, a, target, k=4.0) -> ComparisonRecord:
    mean = float(a.mean())
    se = float(a.std(ddof=1) / math.sqrt(a.size))
    return ComparisonRecord(name, mean, float(target), se, abs(mean - target) <= k * se)


def _var_record(name, a, target, rel_tol) -> ComparisonRecord:
    var = _sample_var(a)
    d = (a - a.mean()) ** 2
    se = float(d.std(ddof=1) / math.sqrt(a.size))
    return ComparisonRecord(name, var, float(target), se, abs(var - target) <= rel_tol * target)


@dataclass(frozen=True)
class StationaryCheck:
    records: list
    n: int


def _lrv_ar1(z: np.ndarray) -> float:
    """Long-run variance of ``z`` under an AR(1) approximation."""
    c = z - z.mean()
    g0 = float(np.dot(c, c) / c.size)
    if g0 == 0:
        return 0.0
    rho = float(np.dot(c[1:], c[:-1]) / c.size) / g0
    rho = min(max(rho, -0.99), 0.99)
    return g0 * (1 + rho) / (1 - rho)


def verify_stationary(spec: ModelSpec, n: int, seed: int, rel_tol=(0.10, 0.15)) -> StationaryCheck:
    """ln n-normalised 1/t sums of one long path against the stationary moments.

    Standard errors use an AR(1) long-run variance of the summand series
    times sum 1/t^2 <= pi^2/6.
    """
    mean, second = stationary_moments(spec)
    path = simulate_path(spec, n, seed)
    x = path.values[:-1].astype(np.float64)
    t = np.arange(1, n + 1, dtype=np.float64)
    ln = math.log(n)
    s1 = K.nsum(x / t) / ln
    s2 = K.nsum(x * x / t) / ln
    c = math.pi / math.sqrt(6.0) / ln
    se1 = c * math.sqrt(_lrv_ar1(x))
    se2 = c * math.sqrt(_lrv_ar1(x * x))
    recs = [
        ComparisonRecord("(1/ln n) sum X_{t-1}/t", s1, mean, se1, abs(s1 - mean) <= rel_tol[0] * mean),
        ComparisonRecord("(1/ln n) sum X_{t-1}^2/t", s2, second, se2, abs(s2 - second) <= rel_tol[1] * second),
    ]
    return StationaryCheck(recs, n)
