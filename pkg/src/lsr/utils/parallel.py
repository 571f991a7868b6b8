"""Process-wide worker-thread budget and an order-preserving parallel map.

numpy and scipy release the GIL inside their kernels, so a thread pool is
enough to overlap RFT column scoring, per-cluster tree training and chunked
inference. Results always come back in input order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

from lsr.utils.singleton import SingletonMeta

T = TypeVar("T")
R = TypeVar("R")


class ThreadBudget(metaclass=SingletonMeta):
    """Number of worker threads the package may use (1 = run inline)."""

    def __init__(self, threads: int = 1):
        self.threads = max(1, int(threads))

    def configure(self, threads: int) -> "ThreadBudget":
        if threads < 1:
            raise ValueError(f"thread count must be >= 1, got {threads}")
        self.threads = int(threads)
        return self

    def map(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply ``func`` to every item, returning results in input order."""
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=min(self.threads, len(items))) as pool:
            return list(pool.map(func, items))
