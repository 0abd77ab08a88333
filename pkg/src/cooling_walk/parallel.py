"""Deterministic task-parallel execution.

Work is split into index-tagged tasks; results are merged in task order, so
the merged output is identical for any worker count (acceptance requirement).
Respects the COOLING_WALK_WORKERS environment variable.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

WORKERS_ENV = "COOLING_WALK_WORKERS"


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def map_indexed(fn: Callable, tasks: Sequence[tuple], workers: int | None = None) -> list:
    """Apply ``fn(*task)`` to each task; results returned in task order."""
    nworkers = resolve_workers(workers)
    if nworkers <= 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(nworkers, len(tasks))) as pool:
        futures = [pool.submit(fn, *task) for task in tasks]
        return [f.result() for f in futures]


def replica_chunks(total: int, workers: int, min_chunk: int = 1) -> list[tuple[int, int]]:
    """Split replica indices [0, total) into contiguous per-task ranges."""
    if total <= 0:
        return []
    n_chunks = max(1, min(workers * 4, total // max(min_chunk, 1), 64))
    bounds = [round(i * total / n_chunks) for i in range(n_chunks + 1)]
    return [(bounds[i], bounds[i + 1]) for i in range(n_chunks) if bounds[i + 1] > bounds[i]]
