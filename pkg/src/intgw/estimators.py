"""Least-squares estimators of (m, mu) for count autoregressions.

Every estimator minimises a weighted sum of squared one-step errors

    sum_t w_t (X_t - m X_{t-1} - mu)^2,   t = 1..n

and differs only in the weights: ``ols`` (w_t = 1), ``wei`` (w_t =
1 / (1 + X_{t-1})), ``recip-t`` (w_t = 1 / t) or user-supplied.  With
``recip-t`` the intercept estimate is consistent in the unit-root case
whether the chain is transient or null recurrent.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels as K
from ._parallel import map_chunks
from ._validation import check_count_path, check_positive_int
from .exceptions import (
    ConfigurationError,
    DegenerateDesignError,
    DegeneratePathError,
    TauUndefinedError,
)
from .model import CountPath, ModelSpec, _fill
from .rng import check_seed, replication_stream

MAX_CONDITION = 1e12

_ALIASES = {
    "ols": "ols",
    "wei": "wei",
    "weiwinnicki": "wei",
    "wei-winnicki": "wei",
    "recip-t": "recip-t",
    "recip_t": "recip-t",
    "reciprocalt": "recip-t",
    "1/t": "recip-t",
    "custom": "custom",
}


@dataclass(frozen=True, eq=False)
class WeightScheme:
    """Weighting of the squared one-step errors.

    Use the module constants :data:`OLS`, :data:`WEI`, :data:`RECIP_T` or
    ``WeightScheme.custom(weights)``.
    """

    kind: str
    custom_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        kind = _ALIASES.get(str(self.kind).lower())
        if kind is None:
            raise ConfigurationError(f"unknown weight scheme {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "custom":
            if self.custom_weights is None:
                raise ConfigurationError("custom scheme needs a weight vector")
            w = np.array(self.custom_weights, dtype=np.float64)
            if w.ndim != 1:
                raise ConfigurationError("custom weights must be 1-d")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ConfigurationError("custom weights must be finite and strictly positive")
            w.setflags(write=False)
            object.__setattr__(self, "custom_weights", w)
        elif self.custom_weights is not None:
            raise ConfigurationError(f"scheme {kind!r} takes no weight vector")

    @classmethod
    def custom(cls, weights) -> WeightScheme:
        return cls("custom", weights)

    @classmethod
    def parse(cls, scheme) -> WeightScheme:
        if isinstance(scheme, WeightScheme):
            return scheme
        if isinstance(scheme, str):
            return cls(scheme)
        return cls.custom(scheme)

    def weights(self, x_prev: np.ndarray) -> np.ndarray:
        """Weights w_1..w_n given the regressors X_0..X_{n-1}."""
        n = x_prev.shape[0]
        if self.kind == "ols":
            return np.ones(n)
        if self.kind == "wei":
            return 1.0 / (1.0 + x_prev)
        if self.kind == "recip-t":
            return 1.0 / np.arange(1, n + 1, dtype=np.float64)
        if self.custom_weights.shape[0] != n:
            raise ConfigurationError(
                f"custom weights have length {self.custom_weights.shape[0]}, path has {n} transitions"
            )
        return self.custom_weights

    def __eq__(self, other):
        if not isinstance(other, WeightScheme):
            return NotImplemented
        if self.kind != other.kind:
            return False
        if self.kind != "custom":
            return True
        return np.array_equal(self.custom_weights, other.custom_weights)

    def __hash__(self):
        return hash(self.kind)

    def __str__(self):
        return self.kind


OLS = WeightScheme("ols")
WEI = WeightScheme("wei")
RECIP_T = WeightScheme("recip-t")


@dataclass(frozen=True, eq=False)
class Estimate:
    """Result of a weighted least-squares fit.

    ``gram`` is the 2x2 weighted normal-equation matrix
    ``[[sum w x^2, sum w x], [sum w x, sum w]]`` and ``rhs`` the matching
    right-hand side ``[sum w x y, sum w y]`` (x = X_{t-1}, y = X_t), so
    that ``gram @ (m_hat, mu_hat) == rhs``.
    """

    m_hat: float
    mu_hat: float
    scheme: WeightScheme
    gram: np.ndarray
    rhs: np.ndarray
    n: int
    condition: float

    def residuals(self, path) -> np.ndarray:
        x, y = check_count_path(path).lagged()
        return y - self.m_hat * x - self.mu_hat

    def error_decomposition(self, path, m_ref: float, mu_ref: float) -> np.ndarray:
        """``gram^{-1} d`` with d built from errors at (m_ref, mu_ref).

        ``d = [sum w x W, sum w W]`` where ``W_t = X_t - m_ref X_{t-1} -
        mu_ref``.  Equals ``(m_hat - m_ref, mu_hat - mu_ref)``.
        """
        path = check_count_path(path)
        x, y = path.lagged()
        w = self.scheme.weights(x)
        err = y - m_ref * x - mu_ref
        d = np.array([K.nsum(w * x * err), K.nsum(w * err)])
        return np.linalg.solve(self.gram, d)

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.kind, "m_hat": self.m_hat, "mu_hat": self.mu_hat, "n": self.n}


def _solve(x: np.ndarray, y: np.ndarray, w: np.ndarray, scheme: WeightScheme) -> Estimate:
    m, mu, s_w, s_wx, s_wxx, s_wy, s_wxy, sxx = K.wls_core(x, y, w)
    n = x.shape[0]
    if not s_wxx > 0 or not sxx > 0:
        raise DegenerateDesignError(
            "degenerate design: X_{t-1} is constant over the sample, so slope and intercept are not identified"
        )
    # condition number of the diagonally rescaled gram, (1 + |rho|) / (1 - |rho|)
    one_minus_rho2 = sxx / s_wxx
    rho = math.sqrt(max(0.0, 1.0 - one_minus_rho2))
    condition = (1.0 + rho) ** 2 / one_minus_rho2 if one_minus_rho2 > 0 else math.inf
    if not condition <= MAX_CONDITION:
        raise DegenerateDesignError(
            f"degenerate design: normal equations have condition number {condition:.3g} > {MAX_CONDITION:g}"
        )
    gram = np.array([[s_wxx, s_wx], [s_wx, s_w]])
    rhs = np.array([s_wxy, s_wy])
    gram.setflags(write=False)
    rhs.setflags(write=False)
    return Estimate(float(m), float(mu), scheme, gram, rhs, n, float(condition))


def fit(path, scheme="recip-t") -> Estimate:
    """Weighted least-squares fit of X_t on (X_{t-1}, 1), t = 1..n.

    At t = 1 the regressor is X_0 (zero for simulated paths) and is kept;
    no offset is added to t in the ``recip-t`` weights.

    Raises
    ------
    DegenerateDesignError
        If the rescaled normal equations have condition number above 1e12,
        e.g. for a path whose lagged values are all equal.
    ConfigurationError
        For fewer than two transitions or custom weights of the wrong length.
    """
    path = check_count_path(path, min_transitions=2)
    scheme = WeightScheme.parse(scheme)
    x, y = path.lagged()
    return _solve(x, y, scheme.weights(x), scheme)


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    values: np.ndarray
    mu_used: float


def residuals(path, mu: float) -> ResidualSeries:
    """Unit-root one-step errors W_t = X_t - X_{t-1} - mu, t = 1..n."""
    path = check_count_path(path)
    x, y = path.lagged()
    return ResidualSeries(y - x - float(mu), float(mu))


def estimate_sigma2(path, mu_tilde: float) -> float:
    """Offspring-variance estimate under the unit root.

    Ratio ``sum (X_t - X_{t-1} - mu_tilde)^2 / sum X_{t-1}``, motivated by
    Var(X_t | X_{t-1}) = sigma2 X_{t-1} + b with the b term negligible on a
    growing path.  Clamped below at 0.
    """
    path = check_count_path(path, min_transitions=2)
    x, y = path.lagged()
    denom = K.nsum(x)
    if denom <= 0:
        raise DegeneratePathError("sigma2 is not identified: all lagged values are zero")
    r = y - x - float(mu_tilde)
    return max(0.0, K.nsum(r * r) / denom)


@dataclass(frozen=True)
class TauEstimate:
    sigma2_hat: float
    tau_hat: float
    transient: bool
    mu_tilde: float

    def to_dict(self) -> dict:
        return {
            "sigma2_hat": self.sigma2_hat,
            "tau_hat": self.tau_hat,
            "transient": self.transient,
            "mu_tilde": self.mu_tilde,
        }


def tau_from(mu_tilde: float, sigma2_hat: float) -> TauEstimate:
    if not sigma2_hat > 0:
        raise TauUndefinedError("tau is undefined: sigma2_hat is zero")
    tau = 2.0 * mu_tilde / sigma2_hat
    return TauEstimate(float(sigma2_hat), float(tau), bool(tau > 1.0), float(mu_tilde))


def estimate_tau(path) -> TauEstimate:
    """tau_hat = 2 mu_tilde / sigma2_hat with mu_tilde from the 1/t fit."""
    path = check_count_path(path, min_transitions=2)
    mu_tilde = fit(path, RECIP_T).mu_hat
    return tau_from(mu_tilde, estimate_sigma2(path, mu_tilde))


class AdaptiveFit(NamedTuple):
    estimate: Estimate
    chosen: str
    tau: TauEstimate
    preliminary: Estimate


def adaptive_fit(path) -> AdaptiveFit:
    """Pick the weighting from the estimated transience index.

    The 1/t fit is always computed first. If tau_hat > 1 the Wei-Winnicki
    fit (weights 1/(1 + X_{t-1})) is returned, otherwise the 1/t fit.
    """
    path = check_count_path(path, min_transitions=2)
    prelim = fit(path, RECIP_T)
    tau = tau_from(prelim.mu_hat, estimate_sigma2(path, prelim.mu_hat))
    if tau.transient:
        return AdaptiveFit(fit(path, WEI), "wei", tau, prelim)
    return AdaptiveFit(prelim, "recip-t", tau, prelim)


@dataclass(frozen=True)
class BiasCorrection:
    mu_raw: float
    bias: float
    mu_corrected: float
    bootstrap_mean: float
    B: int
    failures: int


MU_FLOOR = 1e-3


def bootstrap_bias(
    path, family: ModelSpec, B: int = 500, seed: int = 0, scheme="recip-t", workers: int | None = 1
) -> BiasCorrection:
    """Parametric-bootstrap bias of the intercept estimate.

    Fits ``mu`` on ``path``, simulates ``B`` paths of the same length from
    ``family.with_mu(mu_hat)`` and returns the additive correction
    ``mu_hat - (mean(mu_hat*) - mu_hat)``.  A non-positive ``mu_hat`` is
    floored at 1e-3 for the simulation only.  Bootstrap paths whose fit is
    degenerate are dropped and counted.
    """
    path = check_count_path(path, min_transitions=2)
    B = check_positive_int(B, "B")
    if B < 100:
        warnings.warn(f"B = {B} bootstrap paths give an unstable bias estimate", stacklevel=2)
    seed = check_seed(seed)
    scheme = WeightScheme.parse(scheme)
    mu_raw = fit(path, scheme).mu_hat
    sim_spec = family.with_mu(max(mu_raw, MU_FLOOR))
    n = path.n

    def run(start, stop):
        buf = np.empty(n + 1, dtype=np.int64)
        vals = []
        for r in range(start, stop):
            _fill(sim_spec, replication_stream(seed, r), buf)
            x = buf[:-1].astype(np.float64)
            y = buf[1:].astype(np.float64)
            try:
                vals.append(_solve(x, y, scheme.weights(x), scheme).mu_hat)
            except DegenerateDesignError:
                pass
        return vals

    draws = [v for chunk in map_chunks(run, B, workers) for v in chunk]
    if not draws:
        raise DegenerateDesignError("every bootstrap replication had a degenerate design")
    boot_mean = K.nsum(np.array(draws)) / len(draws)
    bias = boot_mean - mu_raw
    return BiasCorrection(mu_raw, bias, mu_raw - bias, boot_mean, B, B - len(draws))


def bias_correct(path, family: ModelSpec, B: int = 500, seed: int = 0, workers: int | None = 1) -> float:
    """Bias-corrected 1/t intercept estimate; see :func:`bootstrap_bias`."""
    return bootstrap_bias(path, family, B, seed, workers=workers).mu_corrected


class GaltonWatsonWLS(BaseEstimator):
    """Weighted least-squares estimator of (m, mu) for a count series.

    Parameters
    ----------
    scheme : {"recip-t", "ols", "wei"} or array-like, default="recip-t"
        Weighting of the squared one-step errors.  An array is used as
        custom weights (one per transition).

    Attributes
    ----------
    m_ : float
        Estimated offspring mean.
    mu_ : float
        Estimated immigration mean.
    estimate_ : Estimate
        Full fit record (normal equations, condition number).
    n_transitions_ : int

    Examples
    --------
    >>> from intgw.estimators import GaltonWatsonWLS
    >>> est = GaltonWatsonWLS().fit([0, 2, 4, 6])
    >>> round(est.m_, 10), round(est.mu_, 10)
    (1.0, 2.0)
    """

    def __init__(self, scheme="recip-t"):
        self.scheme = scheme

    def fit(self, X, y=None):
        path = check_count_path(X, min_transitions=2)
        self.estimate_ = fit(path, self.scheme)
        self.m_ = self.estimate_.m_hat
        self.mu_ = self.estimate_.mu_hat
        self.n_transitions_ = path.n
        return self

    def predict(self, X):
        """One-step conditional means m_ X_{t-1} + mu_ for t = 1..n."""
        check_is_fitted(self)
        x, _ = check_count_path(X).lagged()
        return self.m_ * x + self.mu_

    def residuals(self, X):
        check_is_fitted(self)
        x, y = check_count_path(X).lagged()
        return y - self.m_ * x - self.mu_


class AdaptiveGaltonWatsonWLS(BaseEstimator):
    """Chooses Wei-Winnicki or 1/t weighting from the estimated transience index.

    Attributes
    ----------
    m_, mu_ : float
    chosen_ : {"wei", "recip-t"}
    tau_ : TauEstimate
    estimate_ : Estimate
    """

    def fit(self, X, y=None):
        res = adaptive_fit(check_count_path(X, min_transitions=2))
        self.estimate_ = res.estimate
        self.chosen_ = res.chosen
        self.tau_ = res.tau
        self.m_ = res.estimate.m_hat
        self.mu_ = res.estimate.mu_hat
        return self

    def predict(self, X):
        check_is_fitted(self)
        x, _ = check_count_path(X).lagged()
        return self.m_ * x + self.mu_


class BiasCorrectedGaltonWatsonWLS(BaseEstimator):
    """1/t intercept estimate with parametric-bootstrap bias correction.

    Parameters
    ----------
    family : ModelSpec, optional
        Family with everything but mu known; defaults to the unit-root
        Poisson INARCH family.
    n_boot : int, default=500
    random_state : int, default=0
        Master seed of the bootstrap streams.
    workers : int, default=1
    """

    def __init__(self, family=None, n_boot=500, random_state=0, workers=1):
        self.family = family
        self.n_boot = n_boot
        self.random_state = random_state
        self.workers = workers

    def fit(self, X, y=None):
        path = check_count_path(X, min_transitions=2)
        family = self.family if self.family is not None else ModelSpec.inarch(1.0)
        self.correction_ = bootstrap_bias(path, family, self.n_boot, self.random_state, workers=self.workers)
        self.mu_raw_ = self.correction_.mu_raw
        self.bias_ = self.correction_.bias
        self.mu_ = self.correction_.mu_corrected
        return self
