"""Order-preserving process pool used by the experiment drivers.

Work items carry their own derived seeds, so results are identical for any
job count; jobs=1 bypasses multiprocessing entirely.
"""

from __future__ import annotations

from typing import Callable, Sequence


def pmap(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    import multiprocessing as mp

    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context()
    chunk = max(1, len(items) // (jobs * 4))
    with ctx.Pool(processes=jobs) as pool:
        return pool.map(fn, items, chunksize=chunk)
