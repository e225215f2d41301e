"""Worker pool helper; results are always returned in input order."""
import os
from concurrent.futures import ProcessPoolExecutor


def n_workers(default=1):
    try:
        return max(1, int(os.environ.get("GNLAB_WORKERS", default)))
    except ValueError:
        return default


def pmap(fn, items, workers=None):
    items = list(items)
    workers = n_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
