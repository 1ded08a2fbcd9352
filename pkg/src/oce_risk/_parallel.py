"""Order-preserving map over replications, capped by ``OCE_THREADS``."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    try:
        cap = int(os.environ.get("OCE_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, os.cpu_count() or 1))


def rep_map(fn, items):
    """``list(map(fn, items))``, run on up to ``worker_count()`` threads.

    Results keep input order, so any reduction over them is deterministic.
    """
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
