"""Thread pool that runs nogil kernels over disjoint slabs of the outer array axis.

Workers stand in for ranks: every stencil kernel takes a half-open index range
``[lo, hi)`` on the outermost (x) storage axis and writes only inside it, so the
slabs can be executed concurrently without races.  A call to :meth:`WorkerPool.run`
is a barrier.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor

log = logging.getLogger(__name__)

# below this many outer planes a kernel runs on the calling thread
MIN_SLAB = 4


class WorkerPool:
    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = int(workers)
        self.oversubscribed = self.workers > (os.cpu_count() or 1)
        if self.oversubscribed:
            log.warning("%d workers requested on %d hardware threads",
                        self.workers, os.cpu_count() or 1)
        self._ex = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def slabs(self, n: int) -> list[tuple[int, int]]:
        parts = min(self.workers, max(1, n // MIN_SLAB))
        edges = [n * p // parts for p in range(parts + 1)]
        return [(edges[p], edges[p + 1]) for p in range(parts)]

    def run(self, kernel, n: int, *args) -> None:
        """Call ``kernel(*args, lo, hi)`` for every slab of ``range(n)``."""
        slabs = self.slabs(n)
        if self._ex is None or len(slabs) == 1:
            for lo, hi in slabs:
                kernel(*args, lo, hi)
            return
        futures = [self._ex.submit(kernel, *args, lo, hi) for lo, hi in slabs]
        for f in futures:
            f.result()

    def close(self) -> None:
        if self._ex is not None:
            self._ex.shutdown()
            self._ex = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_default = WorkerPool(1)


def get_pool() -> WorkerPool:
    return _default


def set_workers(workers: int) -> WorkerPool:
    """Replace the process-wide pool; returns the new pool."""
    global _default
    if workers != _default.workers:
        _default.close()
        _default = WorkerPool(workers)
    return _default
