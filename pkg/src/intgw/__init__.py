"""Simulation, estimation and unit-root testing for integrated Galton-Watson processes with immigration."""

from .cir import CirConfig, sample_limit_law, sample_wls_prelimit, simulate_cir
from .estimators import (
    OLS,
    RECIP_T,
    WEI,
    AdaptiveGaltonWatsonWLS,
    BiasCorrectedGaltonWatsonWLS,
    GaltonWatsonWLS,
    WeightScheme,
    adaptive_fit,
    bias_correct,
    bootstrap_bias,
    estimate_sigma2,
    estimate_tau,
    fit,
)
from .exceptions import (
    CalibrationError,
    ConfigurationError,
    DegenerateDesignError,
    DegeneratePathError,
    DomainError,
    IntGWError,
    MalformedInputError,
    ModelWarning,
    TauUndefinedError,
)
from .model import (
    CountPath,
    ImmigrationDist,
    ModelSpec,
    OffspringDist,
    load_spec,
    read_path_csv,
    simulate_path,
    simulate_paths,
)
from .montecarlo import ExperimentConfig, reproduce_table1, run_experiment, verify_clt
from .testing import decide_regime, unit_root_test

__version__ = "0.1.0"

__all__ = [
    "AdaptiveGaltonWatsonWLS",
    "BiasCorrectedGaltonWatsonWLS",
    "CalibrationError",
    "CirConfig",
    "ConfigurationError",
    "CountPath",
    "DegenerateDesignError",
    "DegeneratePathError",
    "DomainError",
    "ExperimentConfig",
    "GaltonWatsonWLS",
    "ImmigrationDist",
    "IntGWError",
    "MalformedInputError",
    "ModelSpec",
    "ModelWarning",
    "OLS",
    "OffspringDist",
    "RECIP_T",
    "TauUndefinedError",
    "WEI",
    "WeightScheme",
    "adaptive_fit",
    "bias_correct",
    "bootstrap_bias",
    "decide_regime",
    "estimate_sigma2",
    "estimate_tau",
    "fit",
    "load_spec",
    "read_path_csv",
    "reproduce_table1",
    "run_experiment",
    "sample_limit_law",
    "sample_wls_prelimit",
    "simulate_cir",
    "simulate_path",
    "simulate_paths",
    "unit_root_test",
    "verify_clt",
]
