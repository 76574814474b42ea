"""Galton-Watson process with immigration.

The process starts at ``X_0 = 0`` and evolves as

    X_t = sum_{i=1}^{X_{t-1}} Z_{i,t} + eps_t

with i.i.d. offspring counts ``Z`` (mean ``m``, variance ``sigma2``) and i.i.d.
immigration counts ``eps`` (mean ``mu``, variance ``b``).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels as K
from .exceptions import ConfigurationError, DomainError, MalformedInputError, ModelWarning
from .rng import check_seed, replication_stream

OFFSPRING_KINDS = {
    "poisson": K.OFF_POISSON,
    "geometric": K.OFF_GEOMETRIC,
    "bernoulli": K.OFF_BERNOULLI,
    "dirac": K.OFF_DIRAC,
}
IMMIGRATION_KINDS = {
    "poisson": K.IMM_POISSON,
    "negbin": K.IMM_NEGBIN,
    "dirac": K.IMM_DIRAC,
}


@dataclass(frozen=True)
class OffspringDist:
    """Offspring law.

    ``geometric`` counts failures before the first success on {0, 1, ...};
    mean ``m`` means success probability ``1 / (1 + m)``.
    """

    kind: str
    mean: float
    value: int | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        if kind not in OFFSPRING_KINDS:
            raise ConfigurationError(
                f"unknown offspring kind {self.kind!r}; expected one of {sorted(OFFSPRING_KINDS)}"
            )
        if kind == "dirac":
            value = self.value if self.value is not None else self.mean
            if value is None or float(value) != int(value) or int(value) < 0:
                raise ConfigurationError(f"dirac offspring needs a non-negative integer value, got {value!r}")
            object.__setattr__(self, "value", int(value))
            object.__setattr__(self, "mean", float(int(value)))
            return
        mean = float(self.mean)
        if not math.isfinite(mean) or mean < 0:
            raise ConfigurationError(f"offspring mean must be finite and >= 0, got {self.mean!r}")
        if kind == "bernoulli" and mean > 1:
            raise ConfigurationError(f"bernoulli offspring mean must be <= 1, got {mean}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "value", None)

    @classmethod
    def poisson(cls, mean: float) -> OffspringDist:
        return cls("poisson", mean)

    @classmethod
    def geometric(cls, mean: float) -> OffspringDist:
        return cls("geometric", mean)

    @classmethod
    def bernoulli(cls, mean: float) -> OffspringDist:
        return cls("bernoulli", mean)

    @classmethod
    def dirac(cls, value: int) -> OffspringDist:
        return cls("dirac", float(value), int(value))

    @property
    def variance(self) -> float:
        m = self.mean
        if self.kind == "poisson":
            return m
        if self.kind == "geometric":
            return m * (1.0 + m)
        if self.kind == "bernoulli":
            return m * (1.0 - m)
        return 0.0

    def to_dict(self) -> dict:
        if self.kind == "dirac":
            return {"kind": "dirac", "mean": self.mean, "value": self.value}
        return {"kind": self.kind, "mean": self.mean}


@dataclass(frozen=True)
class ImmigrationDist:
    """Immigration law.

    ``negbin`` with mean ``mu`` and dispersion (size) ``r`` has success
    probability ``r / (r + mu)`` and variance ``mu + mu**2 / r``.
    """

    kind: str
    mean: float
    dispersion: float | None = None
    value: int | None = None

    def __post_init__(self):
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        if kind not in IMMIGRATION_KINDS:
            raise ConfigurationError(
                f"unknown immigration kind {self.kind!r}; expected one of {sorted(IMMIGRATION_KINDS)}"
            )
        if kind == "dirac":
            value = self.value if self.value is not None else self.mean
            if value is None or float(value) != int(value) or int(value) < 0:
                raise ConfigurationError(f"dirac immigration needs a non-negative integer value, got {value!r}")
            object.__setattr__(self, "value", int(value))
            object.__setattr__(self, "mean", float(int(value)))
            object.__setattr__(self, "dispersion", None)
            return
        mean = float(self.mean)
        if not math.isfinite(mean) or mean <= 0:
            raise ConfigurationError(f"immigration mean must be > 0, got {self.mean!r}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "value", None)
        if kind == "negbin":
            if self.dispersion is None:
                raise ConfigurationError("negbin immigration needs a dispersion")
            r = float(self.dispersion)
            if not math.isfinite(r) or r <= 0:
                raise ConfigurationError(f"negbin dispersion must be > 0, got {self.dispersion!r}")
            object.__setattr__(self, "dispersion", r)
        else:
            object.__setattr__(self, "dispersion", None)

    @classmethod
    def poisson(cls, mean: float) -> ImmigrationDist:
        return cls("poisson", mean)

    @classmethod
    def negbin(cls, mean: float, dispersion: float) -> ImmigrationDist:
        return cls("negbin", mean, dispersion)

    @classmethod
    def dirac(cls, value: int) -> ImmigrationDist:
        return cls("dirac", float(value), None, int(value))

    @property
    def variance(self) -> float:
        if self.kind == "poisson":
            return self.mean
        if self.kind == "negbin":
            return self.mean + self.mean**2 / self.dispersion
        return 0.0

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "mean": self.mean}
        if self.kind == "negbin":
            d["dispersion"] = self.dispersion
        elif self.kind == "dirac":
            d["value"] = self.value
        return d


@dataclass(frozen=True)
class ModelSpec:
    """Offspring and immigration laws of the process."""

    offspring: OffspringDist
    immigration: ImmigrationDist

    def __post_init__(self):
        if not isinstance(self.offspring, OffspringDist) or not isinstance(self.immigration, ImmigrationDist):
            raise ConfigurationError("ModelSpec needs an OffspringDist and an ImmigrationDist")
        if self.m == 1.0 and self.sigma2 == 0.0:
            warnings.warn(
                "offspring mean 1 with zero variance is outside the model (sigma2 > 0 required); "
                "usable as a deterministic fixture only",
                ModelWarning,
                stacklevel=3,
            )

    @property
    def m(self) -> float:
        return self.offspring.mean

    @property
    def mu(self) -> float:
        return self.immigration.mean

    @property
    def sigma2(self) -> float:
        return self.offspring.variance

    @property
    def b(self) -> float:
        return self.immigration.variance

    @property
    def tau(self) -> float:
        """Transience index 2 mu / sigma2 (inf when sigma2 = 0)."""
        return 2.0 * self.mu / self.sigma2 if self.sigma2 > 0 else math.inf

    @property
    def is_fixture(self) -> bool:
        return self.offspring.kind == "dirac" or self.immigration.kind == "dirac"

    @classmethod
    def inarch(cls, mu: float, m: float = 1.0) -> ModelSpec:
        """Poisson offspring and Poisson immigration: X_t | X_{t-1} ~ Poisson(m X_{t-1} + mu)."""
        return cls(OffspringDist.poisson(m), ImmigrationDist.poisson(mu))

    def with_mu(self, mu: float) -> ModelSpec:
        """Same family with immigration mean replaced by ``mu``."""
        if self.immigration.kind == "dirac":
            value = round(float(mu))
            if abs(float(mu) - value) > 1e-9 * max(1.0, abs(value)):
                raise ConfigurationError(f"dirac immigration needs an integer mean, got {mu!r}")
            return replace(self, immigration=ImmigrationDist.dirac(value))
        return replace(self, immigration=replace(self.immigration, mean=float(mu)))

    def to_dict(self) -> dict:
        return {"offspring": self.offspring.to_dict(), "immigration": self.immigration.to_dict()}

    @classmethod
    def from_dict(cls, record: dict) -> ModelSpec:
        try:
            off = dict(record["offspring"])
            imm = dict(record["immigration"])
            offspring = OffspringDist(off["kind"], off.get("mean", off.get("value")), off.get("value"))
            immigration = ImmigrationDist(
                imm["kind"], imm.get("mean", imm.get("value")), imm.get("dispersion"), imm.get("value")
            )
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed model spec record: {exc}") from None
        return cls(offspring, immigration)

    def _kernel_args(self):
        o, i = self.offspring, self.immigration
        return (
            OFFSPRING_KINDS[o.kind],
            float(o.mean),
            int(o.value or 0),
            IMMIGRATION_KINDS[i.kind],
            float(i.mean),
            float(i.dispersion or 1.0),
            int(i.value or 0),
        )


def load_spec(path: str | Path) -> ModelSpec:
    """Read a :class:`ModelSpec` from a YAML or JSON file."""
    import yaml

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise MalformedInputError(f"cannot read spec file {path}: {exc.strerror}") from None
    try:
        record = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MalformedInputError(f"spec file {path} is not valid YAML/JSON: {exc}") from None
    if not isinstance(record, dict):
        raise MalformedInputError(f"spec file {path} must hold a mapping with offspring and immigration")
    return ModelSpec.from_dict(record)


@dataclass(frozen=True)
class SeedRecord:
    master_seed: int
    replication: int = 0


@dataclass(frozen=True, eq=False)
class CountPath:
    """Non-negative integer series X_0..X_n."""

    values: np.ndarray
    seed: SeedRecord | None = None
    spec: ModelSpec | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1 or v.size == 0:
            raise ConfigurationError("a count path must be a non-empty 1-d sequence")
        if v.dtype.kind == "f":
            if not np.all(np.isfinite(v)) or np.any(v != np.round(v)):
                raise ConfigurationError("a count path must hold integers")
        elif v.dtype.kind not in "iub":
            raise ConfigurationError(f"a count path must hold integers, got dtype {v.dtype}")
        v = v.astype(np.int64)
        if np.any(v < 0):
            raise ConfigurationError("a count path must be non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        """Number of transitions (the path holds n + 1 values)."""
        return self.values.size - 1

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, CountPath):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def lagged(self) -> tuple[np.ndarray, np.ndarray]:
        """(X_{t-1}, X_t) for t = 1..n as float arrays."""
        v = self.values.astype(np.float64)
        return v[:-1], v[1:]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "X_t"])
            for t, x in enumerate(self.values):
                w.writerow([t, int(x)])


def read_path_csv(path: str | Path) -> CountPath:
    """Read a two-column ``t,X_t`` CSV written by :meth:`CountPath.to_csv`."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MalformedInputError(f"cannot read path file {path}: {exc.strerror}") from None
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise MalformedInputError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if header != ["t", "X_t"]:
        raise MalformedInputError(f"{path}: expected header 't,X_t', got {','.join(rows[0])!r}")
    values = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != 2:
            raise MalformedInputError(f"{path}:{lineno}: expected 2 columns, got {len(r)}")
        try:
            t, x = int(r[0]), int(r[1])
        except ValueError:
            raise MalformedInputError(f"{path}:{lineno}: non-integer entry {','.join(r)!r}") from None
        if t != lineno - 2:
            raise MalformedInputError(f"{path}:{lineno}: time index {t} out of sequence")
        if x < 0:
            raise MalformedInputError(f"{path}:{lineno}: negative count {x}")
        values.append(x)
    if not values:
        raise MalformedInputError(f"{path}: no data rows")
    return CountPath(np.array(values, dtype=np.int64))


def _fill(spec: ModelSpec, gen: np.random.Generator, out: np.ndarray, explicit: bool = False) -> np.ndarray:
    K.fill_path(gen, *spec._kernel_args(), out, explicit)
    return out


def simulate_path(
    spec: ModelSpec, n: int, seed: int, replication: int = 0, method: str = "closure"
) -> CountPath:
    """Simulate X_0..X_n.

    Parameters
    ----------
    spec : ModelSpec
    n : int
        Number of transitions, ``n >= 1``.
    seed : int
        Master seed.
    replication : int, default=0
        Replication index; the path is drawn from stream ``(seed, replication)``.
    method : {"closure", "explicit"}
        ``"closure"`` draws each generation's offspring total in one draw
        using the additive closure of the offspring family; ``"explicit"``
        sums ``X_{t-1}`` single draws (O(X_{t-1}) per step; the same law).
    """
    if not isinstance(spec, ModelSpec):
        raise ConfigurationError("spec must be a ModelSpec")
    n = _check_horizon(n)
    if method not in ("closure", "explicit"):
        raise ConfigurationError(f"unknown method {method!r}")
    seed = check_seed(seed)
    out = np.empty(n + 1, dtype=np.int64)
    _fill(spec, replication_stream(seed, replication), out, explicit=method == "explicit")
    return CountPath(out, SeedRecord(seed, int(replication)), spec)


def simulate_paths(spec: ModelSpec, n: int, reps: int, seed: int, start: int = 0) -> np.ndarray:
    """Replications ``start..start+reps-1`` stacked as rows of shape (reps, n + 1)."""
    n = _check_horizon(n)
    seed = check_seed(seed)
    out = np.empty((int(reps), n + 1), dtype=np.int64)
    for i in range(int(reps)):
        _fill(spec, replication_stream(seed, start + i), out[i])
    return out


def sample_transitions(spec: ModelSpec, x_prev: int, size: int, seed: int) -> np.ndarray:
    """``size`` independent draws of X_t given X_{t-1} = ``x_prev``."""
    out = np.empty(int(size), dtype=np.int64)
    K.fill_increments(replication_stream(check_seed(seed), 0), *spec._kernel_args(), int(x_prev), out)
    return out


def conditional_moments(spec: ModelSpec, x_prev: int) -> tuple[float, float]:
    """Mean and variance of X_t given X_{t-1} = ``x_prev``."""
    return spec.m * x_prev + spec.mu, spec.sigma2 * x_prev + spec.b


def stationary_moments(spec: ModelSpec) -> tuple[float, float]:
    """Mean and second moment of the stationary law (requires m < 1)."""
    m = spec.m
    if m >= 1:
        raise DomainError(f"no stationary law for offspring mean m = {m} >= 1")
    mean = spec.mu / (1.0 - m)
    second = mean**2 + (spec.sigma2 * mean + spec.b) / (1.0 - m * m)
    return mean, second


def _check_horizon(n) -> int:
    if isinstance(n, (bool, np.bool_)) or not isinstance(n, (int, np.integer)):
        raise ConfigurationError(f"n must be a positive integer, got {n!r}")
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    return int(n)
