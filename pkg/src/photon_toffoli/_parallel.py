import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    """Worker cap from PHOTON_SIM_THREADS (0 or unset = one per CPU)."""
    try:
        n = int(os.environ.get("PHOTON_SIM_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def pmap(fn, items):
    """Order-preserving map; results never depend on the worker count."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
