"""Order-preserving parallel map over replication indices."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

from .rng import resolve_workers

CHUNK = 64


def map_chunks(func, count: int, workers: int | None = None, chunk: int = CHUNK) -> list:
    """Apply ``func(start, stop)`` to consecutive chunks of ``range(count)``.

    Results come back in chunk order. ``func`` must depend only on its
    index range (each index owns its random stream), so results do not
    depend on the number of workers.  The compiled kernels release the
    GIL, so threads give real parallelism.
    """
    bounds = [(s, min(s + chunk, count)) for s in range(0, count, chunk)]
    workers = resolve_workers(workers)
    if workers == 1 or len(bounds) <= 1:
        return [func(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: func(*ab), bounds))
