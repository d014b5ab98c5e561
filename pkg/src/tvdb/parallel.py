"""Thread-pool helper honoring the TVDB_THREADS cap."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers(default: int | None = None) -> int:
    env = os.environ.get("TVDB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"TVDB_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"TVDB_THREADS must be a positive integer, got {env!r}")
        return n
    return default or min(8, os.cpu_count() or 1)


def pmap(fn, items) -> list:
    """Ordered map over ``items``; runs serially when only one worker is allowed."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
