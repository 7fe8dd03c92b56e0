import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    """Worker cap from ``KT_THREADS`` (default 1, i.e. serial)."""
    try:
        return max(1, int(os.environ.get("KT_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(func, items):
    """``list(map(func, items))``, threaded when ``KT_THREADS > 1``; order is preserved."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
