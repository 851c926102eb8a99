from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, TypeVar

T = TypeVar("T")


def block_ranges(n_paths: int, block_size: int) -> list[range]:
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    return [range(a, min(a + block_size, n_paths)) for a in range(0, n_paths, block_size)]


def map_blocks(fn: Callable[[range], T], ranges: list[range], workers: int = 1) -> Iterator[T]:
    """Apply ``fn`` to each range, yielding results in range order.

    With several workers at most ``workers`` blocks are in flight, so memory
    stays bounded by a few blocks.  Results never depend on ``workers``.
    """
    if workers <= 1:
        for r in ranges:
            yield fn(r)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, len(ranges), workers):
            yield from pool.map(fn, ranges[start:start + workers])
