"""CIR diffusion limit and the limit laws built from it.

The unit-root process rescaled as X_{floor(ns)}/n converges to

    dY_s = mu0 ds + sigma0 sqrt(Y_s) dB_s,   Y_0 = 0,

simulated here by full-truncation Euler on a uniform grid of [0, 1].
Integrals with a 1/s weight are finite because Y_s/s -> mu0 as s -> 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from ._parallel import map_chunks
from ._validation import check_positive_int
from .exceptions import ConfigurationError
from .rng import BLOCK_STREAM, GAUSS_STREAM, PATH_STREAM, check_seed, stream

BLOCK = 256

FUNCTIONAL_NAMES = (
    "int_Y_over_s",
    "int_Y2_over_s",
    "stoch_int_Y32",
    "stoch_int_sqrtY",
    "int_Y",
    "int_Y2",
    "stoch_int_Y32_plain",
    "z_gauss",
)
_COL = {name: i for i, name in enumerate(FUNCTIONAL_NAMES)}

LIMIT_LAWS = ("wls-slope", "ols-pair", "mu-gauss")


@dataclass(frozen=True)
class CirConfig:
    mu0: float
    sigma0: float
    grid_size: int = 1000

    def __post_init__(self):
        mu0, sigma0 = float(self.mu0), float(self.sigma0)
        if not math.isfinite(mu0) or mu0 <= 0:
            raise ConfigurationError(f"mu0 must be > 0, got {self.mu0!r}")
        if not math.isfinite(sigma0) or sigma0 < 0:
            raise ConfigurationError(f"sigma0 must be >= 0, got {self.sigma0!r}")
        object.__setattr__(self, "mu0", mu0)
        object.__setattr__(self, "sigma0", sigma0)
        object.__setattr__(self, "grid_size", check_positive_int(self.grid_size, "grid_size"))

    @property
    def dt(self) -> float:
        return 1.0 / self.grid_size

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.grid_size + 1) / self.grid_size


@dataclass(frozen=True, eq=False)
class CirPath:
    """Y_0..Y_N on the grid and the Brownian increments that produced it."""

    values: np.ndarray
    increments: np.ndarray
    seed: int | None = None
    replication: int = 0


@dataclass(frozen=True)
class LimitFunctionals:
    """Functionals of one CIR path.

    ``stoch_int_Y32`` is sigma0 * int Y^{3/2}/s dB and ``stoch_int_sqrtY``
    is sigma0 * int sqrt(Y) dB; ``stoch_int_Y32_plain`` is sigma0 * int
    Y^{3/2} dB (the OLS numerator).  ``z_gauss`` is an independent
    N(0, sigma0^2 mu0) draw.
    """

    int_Y_over_s: float
    int_Y2_over_s: float
    stoch_int_Y32: float
    stoch_int_sqrtY: float
    int_Y: float
    int_Y2: float
    stoch_int_Y32_plain: float
    z_gauss: float


def simulate_cir(cfg: CirConfig, seed: int, replication: int = 0) -> CirPath:
    """One full-truncation Euler path, drawn from stream ``(seed, replication, 0)``."""
    seed = check_seed(seed)
    values = np.empty(cfg.grid_size + 1)
    increments = np.empty(cfg.grid_size)
    K.cir_fill(stream(seed, replication, PATH_STREAM), cfg.mu0, cfg.sigma0, cfg.grid_size, values, increments)
    return CirPath(values, increments, seed, int(replication))


def limit_functionals(path: CirPath, cfg: CirConfig, seed: int | None = None) -> LimitFunctionals:
    """Evaluate the limit functionals on ``path``.

    ``z_gauss`` comes from stream ``(seed, replication, 1)``, which never
    touches the path's Brownian increments; ``seed`` defaults to the
    path's own seed.
    """
    if path.increments.shape[0] != cfg.grid_size:
        raise ConfigurationError("path was not generated on this grid")
    r = K.cir_functionals(path.values, path.increments, cfg.mu0, cfg.sigma0)
    seed = path.seed if seed is None else seed
    if seed is None:
        raise ConfigurationError("a seed is needed to draw z_gauss for a path without seed record")
    z = stream(seed, path.replication, GAUSS_STREAM).normal(0.0, cfg.sigma0 * math.sqrt(cfg.mu0))
    return LimitFunctionals(*(float(v) for v in r), float(z))


def _block(cfg: CirConfig, seed: int, b: int, count: int) -> np.ndarray:
    out = np.empty((count, len(FUNCTIONAL_NAMES)))
    K.cir_functionals_block(stream(seed, b, BLOCK_STREAM), cfg.mu0, cfg.sigma0, cfg.grid_size, count, out)
    out[:, -1] = stream(seed, b, GAUSS_STREAM).normal(0.0, cfg.sigma0 * math.sqrt(cfg.mu0), size=count)
    return out


def sample_functionals(cfg: CirConfig, draws: int, seed: int, workers: int | None = 1, first_block: int = 0) -> np.ndarray:
    """``draws`` i.i.d. functional records as an array with columns :data:`FUNCTIONAL_NAMES`.

    Draws are generated in blocks of 256; block ``b`` owns streams
    ``(seed, b, 2)`` (paths) and ``(seed, b, 1)`` (z_gauss), so the first k
    draws are the same whatever ``draws`` or ``workers`` is.
    """
    seed = check_seed(seed)
    draws = check_positive_int(draws, "draws")
    nblocks = -(-draws // BLOCK)

    def run(start, stop):
        return [_block(cfg, seed, first_block + b, BLOCK) for b in range(start, stop)]

    blocks = [blk for chunk in map_chunks(run, nblocks, workers, chunk=1) for blk in chunk]
    return np.concatenate(blocks)[:draws]


def _law_values(which: str, F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Limit-law values and a validity mask from functional records."""
    if which == "wls-slope":
        den = F[:, _COL["int_Y2_over_s"]]
        ok = den > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = F[:, _COL["stoch_int_Y32"]] / den
        return vals, ok & np.isfinite(vals)
    if which == "ols-pair":
        A = F[:, _COL["int_Y2"]]
        C = F[:, _COL["int_Y"]]
        u = F[:, _COL["stoch_int_Y32_plain"]]
        v = F[:, _COL["stoch_int_sqrtY"]]
        det = A - C * C
        ok = det > 1e-12 * np.maximum(A, 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.column_stack(((u - C * v) / det, (A * v - C * u) / det))
        return vals, ok & np.all(np.isfinite(vals), axis=1)
    raise ConfigurationError(f"unknown limit law {which!r}; expected one of {LIMIT_LAWS}")


@dataclass(frozen=True, eq=False)
class LimitLawSample:
    which: str
    values: np.ndarray
    rejected: int


def sample_limit_law(which: str, cfg: CirConfig, draws: int, seed: int, workers: int | None = 1) -> LimitLawSample:
    """I.i.d. draws from one of the limit laws.

    ``"wls-slope"``
        limit of n(m_tilde - 1): sigma0 int Y^{3/2}/s dB / int Y^2/s ds.
    ``"ols-pair"``
        limit of (n(m_hat - 1), mu_hat - mu0), shape (draws, 2): the 2x2
        system [[int Y^2, int Y], [int Y, 1]]^{-1} [sigma0 int Y^{3/2} dB,
        sigma0 int sqrt(Y) dB].
    ``"mu-gauss"``
        N(0, sigma0^2 mu0), the limit of sqrt(ln n)(mu_tilde - mu0).

    Draws whose 2x2 system (or denominator) is singular are replaced by
    draws from further blocks; their number is reported as ``rejected``.
    """
    which = str(which).lower().replace("_", "-")
    seed = check_seed(seed)
    draws = check_positive_int(draws, "draws")
    if which == "mu-gauss":
        vals = np.concatenate(
            [
                stream(seed, b, GAUSS_STREAM).normal(0.0, cfg.sigma0 * math.sqrt(cfg.mu0), size=BLOCK)
                for b in range(-(-draws // BLOCK))
            ]
        )[:draws]
        return LimitLawSample(which, vals, 0)
    if which not in LIMIT_LAWS:
        raise ConfigurationError(f"unknown limit law {which!r}; expected one of {LIMIT_LAWS}")
    F = sample_functionals(cfg, draws, seed, workers)
    vals, ok = _law_values(which, F)
    kept = [vals[ok]]
    rejected = int((~ok).sum())
    have = int(ok.sum())
    next_block = -(-draws // BLOCK)
    while have < draws:
        if next_block > 64 * (-(-draws // BLOCK)) + 64:
            raise ConfigurationError(f"limit law {which!r} is degenerate for {cfg}")
        extra = _block(cfg, seed, next_block, BLOCK)
        next_block += 1
        v, o = _law_values(which, extra)
        kept.append(v[o])
        rejected += int((~o).sum())
        have += int(o.sum())
    return LimitLawSample(which, np.concatenate(kept)[:draws], rejected)


def sample_wls_prelimit(
    cfg: CirConfig, n: int, draws: int, seed: int, workers: int | None = 1
) -> LimitLawSample:
    """Draws of n(m_tilde - 1) at sample size ``n`` from CIR paths.

    Keeps the full 1/t-weighted 2x2 system instead of its limit, so the
    intercept coupling that vanishes like 1/sqrt(ln n) is retained.  The
    grid is ``min(n, cfg.grid_size)``; the part of [1/n, 1/grid) the grid
    misses enters the intercept score as an independent Gaussian with
    variance sigma0^2 mu0 (H_n - H_grid).  As n grows the law tends to
    ``"wls-slope"``.
    """
    seed = check_seed(seed)
    n = check_positive_int(n, "n")
    draws = check_positive_int(draws, "draws")
    grid = min(n, cfg.grid_size)
    h_n = _harmonic(n)
    extra = cfg.sigma0**2 * cfg.mu0 * max(0.0, h_n - _harmonic(grid))

    def one(b):
        out = np.empty(BLOCK)
        K.cir_wls_prelimit_block(stream(seed, b, BLOCK_STREAM), cfg.mu0, cfg.sigma0, grid, h_n, extra, BLOCK, out)
        return out

    def run(start, stop):
        return [one(b) for b in range(start, stop)]

    nblocks = -(-draws // BLOCK)
    vals = np.concatenate([v for chunk in map_chunks(run, nblocks, workers, chunk=1) for v in chunk])
    ok = np.isfinite(vals)
    kept, rejected, b = [vals[ok]], int((~ok).sum()), nblocks
    have = int(ok.sum())
    while have < draws:
        if b > 64 * nblocks + 64:
            raise ConfigurationError(f"pre-limit law is degenerate for {cfg}")
        v = one(b)
        b += 1
        o = np.isfinite(v)
        kept.append(v[o])
        rejected += int((~o).sum())
        have += int(o.sum())
    return LimitLawSample("wls-prelimit", np.concatenate(kept)[:draws], rejected)


def _harmonic(n: int) -> float:
    if n <= 10_000:
        return float(K.nsum(1.0 / np.arange(1, n + 1)))
    # asymptotic expansion, error below 1e-17 at this size
    return math.log(n) + 0.5772156649015329 + 1 / (2 * n) - 1 / (12 * n * n)


def quantile_table(values: np.ndarray, probabilities) -> list[tuple[float, float]]:
    probs = np.asarray(probabilities, dtype=float)
    return list(zip(probs.tolist(), np.quantile(values, probs).tolist()))


def write_quantile_csv(path: str | Path, table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["probability", "quantile"])
        for p, q in table:
            w.writerow([repr(float(p)), repr(float(q))])


def read_quantile_csv(path: str | Path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["probability", "quantile"]:
        raise ConfigurationError(f"{path}: not a quantile table")
    return [(float(p), float(q)) for p, q in rows[1:]]


def write_draws_csv(path: str | Path, sample: LimitLawSample) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if sample.values.ndim == 1:
            name = "n_m_minus_1" if sample.which == "wls-slope" else "z"
            w.writerow([name])
            for v in sample.values:
                w.writerow([repr(float(v))])
        else:
            w.writerow(["n_m_minus_1", "mu_minus_mu0"])
            for a, b in sample.values:
                w.writerow([repr(float(a)), repr(float(b))])
