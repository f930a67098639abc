"""Order-preserving parallel map for independent Monte Carlo trials."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable


def default_workers() -> int:
    return os.cpu_count() or 1


def pmap(fn: Callable, items: Iterable, workers: int | None = 1, chunksize: int | None = None) -> list:
    """``list(map(fn, items))``, spread over ``workers`` processes when above 1.

    Results come back in input order, and every trial derives its own
    random stream, so the output does not depend on ``workers``.
    """
    items = list(items)
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    workers = min(workers, len(items))
    chunksize = chunksize or max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
