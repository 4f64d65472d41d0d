"""Deterministic per-target parallelism helpers.

Work is split into fixed-size blocks whose boundaries never depend on the
worker count, and every block writes only its own slice of a preallocated
output, so results are bitwise identical at any parallelism level.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_BLOCK = 512


def resolve_workers(workers=None) -> int:
    """Explicit argument wins, then SOCDIFF_WORKERS, then machine parallelism."""
    if workers is not None:
        w = int(workers)
    else:
        env = os.environ.get("SOCDIFF_WORKERS", "").strip()
        w = int(env) if env else (os.cpu_count() or 1)
    if w < 1:
        raise ValueError(f"worker count must be >= 1, got {w}")
    return w


def map_blocks(fn, n: int, workers=None, block: int = _BLOCK):
    """Call fn(start, stop) for every block of range(n), possibly threaded.

    fn must write its results into caller-owned storage keyed by index;
    return values are ignored.
    """
    if n <= 0:
        return
    spans = [(s, min(s + block, n)) for s in range(0, n, block)]
    w = resolve_workers(workers)
    if w == 1 or len(spans) == 1:
        for s, e in spans:
            fn(s, e)
        return
    with ThreadPoolExecutor(max_workers=w) as pool:
        # consume results to surface worker exceptions
        list(pool.map(lambda span: fn(*span), spans))
