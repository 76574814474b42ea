"""Input validation helpers."""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigurationError
from .model import CountPath


def check_count_path(X, min_transitions: int = 1) -> CountPath:
    """Coerce ``X`` to a :class:`CountPath`.

    Accepts a CountPath, a 1-d sequence or a single-column 2-d array (the
    shape scikit-learn passes around for one series).
    """
    if isinstance(X, CountPath):
        path = X
    else:
        arr = np.asarray(X)
        if arr.ndim == 2 and arr.shape[1] == 1:
            arr = arr[:, 0]
        if arr.ndim != 1:
            raise ConfigurationError(f"expected a single count series, got array of shape {arr.shape}")
        path = CountPath(arr)
    if path.n < min_transitions:
        raise ConfigurationError(
            f"path has {path.n} transitions; at least {min_transitions} required"
        )
    return path


def check_level(level: float) -> float:
    level = float(level)
    if not 0.0 < level < 1.0:
        raise ConfigurationError(f"level must lie in (0, 1), got {level}")
    return level


def check_positive_int(value, name: str) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)) or value < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
