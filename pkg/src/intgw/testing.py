"""Unit-root test on the offspring mean and the stationary/integrated decision.

The null is m = 1.  The statistic n(m_tilde - 1) (1/t weights) or
n(m_hat - 1) (OLS) is compared with an equal-tailed region from simulated
draws of its CIR limit law, with mu0 and sigma0^2 replaced by the 1/t
intercept estimate and the ratio variance estimate.  Plug-ins are rounded
to 4 decimals before simulating, so cached and fresh critical values agree.

For the 1/t statistic the default calibration ("prelimit") simulates the
full weighted 2x2 system at the sample's own n.  The pure limit ratio
("limit") ignores an intercept coupling that only decays like
1/sqrt(ln n) and gives an oversized test at practical n.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ._validation import check_count_path, check_level, check_positive_int
from .cir import CirConfig, read_quantile_csv, sample_limit_law, sample_wls_prelimit, write_quantile_csv
from .estimators import OLS, RECIP_T, estimate_sigma2, fit
from .exceptions import CalibrationError, ConfigurationError, DegeneratePathError
from .rng import check_seed

STANDARD_LEVELS = (0.01, 0.05, 0.10)
DEFAULT_LIMIT_DRAWS = 10_000
DEFAULT_GRID = 500
MIN_RECOMMENDED_N = 50
CALIBRATIONS = ("prelimit", "limit")

LIKELY_INTEGRATED = "LikelyIntegrated"
LIKELY_STATIONARY = "LikelyStationary"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class UnitRootResult:
    statistic: float
    estimator_used: str
    plug_in: dict
    critical_values: dict
    reject: bool
    level: float
    n: int
    limit_draws: int
    seed: int
    calibration: str = "limit"

    @property
    def acceptance_region(self) -> tuple[float, float]:
        return self.critical_values[self.level]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["critical_values"] = {repr(k): list(v) for k, v in self.critical_values.items()}
        d["schema_version"] = 1
        return d

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


class CriticalValueCache:
    """Directory of ``{probability, quantile}`` CSV tables.

    Tables are keyed by (law, rounded mu_tilde, rounded sigma2_hat,
    limit_draws, grid_size, seed); the pre-limit law name carries n.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _file(self, key: tuple) -> Path:
        est, mu, s2, draws, grid, seed = key
        return self.directory / f"cv_{est}_mu{mu:.4f}_s2{s2:.4f}_d{draws}_g{grid}_s{seed}.csv"

    def get(self, key: tuple, probabilities) -> dict | None:
        f = self._file(key)
        if not f.exists():
            return None
        table = dict(read_quantile_csv(f))
        if not all(p in table for p in probabilities):
            return None
        return table

    def put(self, key: tuple, table: dict) -> None:
        write_quantile_csv(self._file(key), sorted(table.items()))


def _probabilities(levels) -> list[float]:
    probs = set()
    for a in levels:
        probs.add(round(a / 2, 12))
        probs.add(round(1 - a / 2, 12))
    return sorted(probs)


def limit_quantiles(
    estimator: str,
    mu_tilde: float,
    sigma2_hat: float,
    levels,
    limit_draws: int,
    seed: int,
    grid_size: int = DEFAULT_GRID,
    cache: CriticalValueCache | None = None,
    workers: int | None = 1,
    n: int | None = None,
) -> dict:
    """Quantiles {probability: value} of the slope limit law under plug-ins.

    ``estimator`` is ``"wls"``, ``"ols"`` or ``"wls-prelimit"``; the last
    needs the sample size ``n``.
    """
    mu_r, s2_r = round(float(mu_tilde), 4), round(float(sigma2_hat), 4)
    if not mu_r > 0:
        raise CalibrationError(f"cannot calibrate: intercept estimate {mu_tilde:.6g} is not positive")
    if not s2_r > 0:
        raise CalibrationError(f"cannot calibrate: sigma2_hat = {sigma2_hat:.6g} is not positive")
    probs = _probabilities(levels)
    law = estimator
    if estimator == "wls-prelimit":
        if n is None:
            raise ConfigurationError("the pre-limit law needs the sample size n")
        law = f"wlsn{int(n)}"
    key = (law, mu_r, s2_r, int(limit_draws), int(grid_size), int(seed))
    if cache is not None:
        hit = cache.get(key, probs)
        if hit is not None:
            return {p: hit[p] for p in probs}
    cfg = CirConfig(mu_r, math.sqrt(s2_r), grid_size)
    if estimator == "wls-prelimit":
        draws = sample_wls_prelimit(cfg, n, limit_draws, seed, workers).values
    elif estimator == "wls":
        draws = sample_limit_law("wls-slope", cfg, limit_draws, seed, workers).values
    else:
        draws = sample_limit_law("ols-pair", cfg, limit_draws, seed, workers).values[:, 0]
    table = dict(zip(probs, np.quantile(draws, probs).tolist()))
    if cache is not None:
        cache.put(key, table)
    return table


def unit_root_test(
    path,
    level: float = 0.05,
    estimator: str = "wls",
    limit_draws: int = DEFAULT_LIMIT_DRAWS,
    seed: int = 0,
    grid_size: int = DEFAULT_GRID,
    cache: CriticalValueCache | None = None,
    workers: int | None = 1,
    calibration: str = "prelimit",
) -> UnitRootResult:
    """Two-sided test of m = 1 at the given level.

    Parameters
    ----------
    path : CountPath or array-like
    level : float, default=0.05
    estimator : {"wls", "ols"}
        ``"wls"`` uses n(m_tilde - 1) from the 1/t fit and its limit law;
        ``"ols"`` uses n(m_hat - 1) and the first coordinate of the OLS
        limit pair.
    limit_draws : int, default=10000
        Number of limit-law draws behind the critical values.
    seed : int
        Master seed of the limit-law draws; the result is a deterministic
        function of (path, level, estimator, limit_draws, seed, grid_size).
    grid_size : int, default=500
        Euler grid of the CIR limit (capped at n for the pre-limit law).
    calibration : {"prelimit", "limit"}, default="prelimit"
        For ``"wls"`` only: simulate the finite-n 2x2 system or the pure
        limit ratio.  OLS always uses its limit pair.

    Raises
    ------
    DegeneratePathError
        For paths whose lagged values are constant (e.g. all zero).
    CalibrationError
        When the plug-in sigma2_hat or intercept is not positive.
    """
    path = check_count_path(path, min_transitions=2)
    level = check_level(level)
    estimator = str(estimator).lower()
    if estimator not in ("wls", "ols"):
        raise ConfigurationError(f"estimator must be 'wls' or 'ols', got {estimator!r}")
    limit_draws = check_positive_int(limit_draws, "limit_draws")
    calibration = str(calibration).lower()
    if calibration not in CALIBRATIONS:
        raise ConfigurationError(f"calibration must be one of {CALIBRATIONS}, got {calibration!r}")
    seed = check_seed(seed)
    x = path.values[:-1]
    if np.all(x == x[0]):
        raise DegeneratePathError("degenerate path: lagged values are constant")
    if path.n < MIN_RECOMMENDED_N:
        warnings.warn(f"n = {path.n} < {MIN_RECOMMENDED_N}: plug-in estimates are unstable", stacklevel=2)

    prelim = fit(path, RECIP_T)
    mu_tilde = prelim.mu_hat
    sigma2_hat = estimate_sigma2(path, mu_tilde)
    slope = prelim.m_hat if estimator == "wls" else fit(path, OLS).m_hat
    statistic = path.n * (slope - 1.0)

    levels = sorted(set(STANDARD_LEVELS) | {level})
    law = "wls-prelimit" if estimator == "wls" and calibration == "prelimit" else estimator
    q = limit_quantiles(law, mu_tilde, sigma2_hat, levels, limit_draws, seed, grid_size, cache, workers, n=path.n)
    critical = {a: (q[round(a / 2, 12)], q[round(1 - a / 2, 12)]) for a in levels}
    lo, hi = critical[level]
    return UnitRootResult(
        statistic=float(statistic),
        estimator_used=estimator.upper(),
        plug_in={"mu_tilde": float(mu_tilde), "sigma2_hat": float(sigma2_hat)},
        critical_values=critical,
        reject=bool(statistic < lo or statistic > hi),
        level=level,
        n=path.n,
        limit_draws=limit_draws,
        seed=seed,
        calibration=calibration if estimator == "wls" else "limit",
    )


@dataclass(frozen=True)
class RegimeDecision:
    regime: str
    unilateral: bool
    unit_root_rejected: bool
    stationarity_rejected: bool | None
    unit_root: UnitRootResult | None = None


def combine_decisions(unit_root_rejected: bool, stationarity_rejected: bool | None) -> tuple[str, bool]:
    """Regime from the two test outcomes; returns ``(regime, unilateral)``."""
    if stationarity_rejected is None:
        return (LIKELY_STATIONARY if unit_root_rejected else LIKELY_INTEGRATED), True
    if not unit_root_rejected and stationarity_rejected:
        return LIKELY_INTEGRATED, False
    if unit_root_rejected and not stationarity_rejected:
        return LIKELY_STATIONARY, False
    return INCONCLUSIVE, False


def decide_regime(path, level: float = 0.05, stationarity_pvalue: float | None = None, **test_kwargs) -> RegimeDecision:
    """Combine the unit-root test with an externally computed stationarity p-value.

    The stationarity test (null m < 1, e.g. KPSS) is not computed here;
    pass its p-value.  Without it only the unit-root half is used and the
    decision is flagged ``unilateral``.
    """
    result = unit_root_test(path, level, **test_kwargs)
    stat_rej = None
    if stationarity_pvalue is not None:
        p = float(stationarity_pvalue)
        if not 0.0 <= p <= 1.0:
            raise ConfigurationError(f"stationarity p-value must lie in [0, 1], got {p}")
        stat_rej = p < result.level
    regime, unilateral = combine_decisions(result.reject, stat_rej)
    return RegimeDecision(regime, unilateral, result.reject, stat_rej, result)
