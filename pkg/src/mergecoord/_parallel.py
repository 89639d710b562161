import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "MERGECOORD_THREADS"


def worker_count() -> int:
    """Worker cap from ``MERGECOORD_THREADS`` (0 or unset = one per CPU)."""
    raw = os.environ.get(ENV_THREADS, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def pmap(fn, items):
    """Order-preserving map, threaded when more than one worker is allowed."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
