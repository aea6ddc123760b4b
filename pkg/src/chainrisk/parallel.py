"""Order-preserving parallel map used by the Monte-Carlo drivers."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_workers(workers: int | None) -> int:
    """``workers`` if given, else ``$CHAINRISK_WORKERS``, else 1."""
    if workers is None:
        env = os.environ.get("CHAINRISK_WORKERS", "").strip()
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def pmap(fn, items, workers: int | None = None, chunksize: int = 1) -> list:
    """``list(map(fn, items))``, optionally spread over worker processes.

    Each item must carry its own seed so the output does not depend on
    ``workers``.
    """
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
