"""Order-preserving map over independent grid points."""

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, threads=1):
    items = list(items)
    if threads is None or threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
