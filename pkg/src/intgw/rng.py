"""Seed handling.

Every random quantity is drawn from its own PCG64 stream. A stream is
identified by ``(master_seed, key...)`` and built as::

    SeedSequence(master_seed, spawn_key=key)

so the stream of replication ``r`` never depends on how many replications
are run or on which worker runs it.  Keys in use:

* ``(r,)`` or ``(r, 0)`` -- count path / CIR path of replication ``r``
* ``(r, 1)`` -- the auxiliary Gaussian attached to CIR replication ``r``
* ``(b, 2)`` -- block ``b`` of limit-law draws
"""

from __future__ import annotations

import os

import numpy as np

SEED_ENV_VAR = "INTGW_SEED"
MAX_SEED = 2**64 - 1

PATH_STREAM = 0
GAUSS_STREAM = 1
BLOCK_STREAM = 2


def check_seed(seed) -> int:
    """Return ``seed`` as a validated non-negative 64-bit integer."""
    if isinstance(seed, (bool, np.bool_)) or seed is None:
        raise ValueError(f"seed must be an integer, got {seed!r}")
    if isinstance(seed, str):
        try:
            value = int(seed, 10)
        except ValueError:
            raise ValueError(f"seed must be an integer, got {seed!r}") from None
    elif isinstance(seed, (int, np.integer)):
        value = int(seed)
    else:
        raise ValueError(f"seed must be an integer, got {seed!r}")
    if not 0 <= value <= MAX_SEED:
        raise ValueError(f"seed must lie in [0, 2**64), got {value}")
    return value


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for the stream ``(master_seed, *key)``."""
    ss = np.random.SeedSequence(check_seed(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def replication_stream(master_seed: int, replication: int) -> np.random.Generator:
    return stream(master_seed, replication, PATH_STREAM)


def seed_from_env(default: int | None = None) -> int | None:
    """Master seed from :data:`SEED_ENV_VAR` if set, else ``default``."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == "":
        return default
    return check_seed(raw.strip())


def resolve_workers(workers: int | None) -> int:
    if workers is None or workers <= 0:
        return os.cpu_count() or 1
    return int(workers)
