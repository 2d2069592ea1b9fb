"""Worker-count setting and an order-preserving map.

Every parallel task in the package is an independent evaluation whose result
is stored at a fixed index, so outputs are bit-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

_workers = 1


def set_workers(n: int) -> None:
    global _workers
    if int(n) < 1:
        raise ValueError(f"worker count must be >= 1, got {n}")
    _workers = int(n)


def get_workers() -> int:
    return _workers


@contextmanager
def workers(n: int):
    old = _workers
    set_workers(n)
    try:
        yield
    finally:
        set_workers(old)


def map_ordered(fn, items):
    """``[fn(x) for x in items]``, optionally spread over threads."""
    items = list(items)
    if _workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_workers) as pool:
        return list(pool.map(fn, items))
