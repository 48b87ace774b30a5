"""Ordered thread-pool map honouring ``PLUMETOMO_THREADS``."""

import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "PLUMETOMO_THREADS"


def thread_count(threads=None):
    if threads is None:
        raw = os.environ.get(ENV_THREADS, "1")
        try:
            threads = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    return max(1, int(threads))


def ordered_map(func, items, threads=None):
    """``list(map(func, items))``, optionally on a pool; result order never depends on scheduling."""
    items = list(items)
    n = thread_count(threads)
    if n == 1 or len(items) < 2:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
