import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "KICKHO_THREADS"


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def map_ordered(fn, items, workers=1):
    """``[fn(x) for x in items]``, optionally on a thread pool.

    LAPACK releases the GIL, so threads give real speedup on the per-eta
    work units. Results always come back in input order.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
