"""
Runtime helpers: timing, worker-count resolution and ordered parallel maps.
"""

import functools
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from tqdm import tqdm

LOGGER = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def timeit(func: Callable) -> Callable:
    """Decorator to log function execution time."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        LOGGER.debug("⏱️  %s took %.3fs", func.__name__, time.perf_counter() - start_time)
        return result
    return wrapper


def resolve_threads(threads: Optional[int] = None) -> int:
    """Worker count: the requested value, or all available cores."""
    if threads is None or threads <= 0:
        try:
            return max(1, len(os.sched_getaffinity(0)))
        except AttributeError:
            return max(1, os.cpu_count() or 1)
    return int(threads)


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None,
                 progress: bool = False, desc: Optional[str] = None) -> List[R]:
    """
    Apply func to every item on a thread pool.

    Results come back in input order, so the output never depends on the
    number of workers. NumPy releases the GIL inside FFTs and BLAS calls,
    which is where the work in this package happens.
    """
    items = list(items)
    workers = min(resolve_threads(threads), max(1, len(items)))
    bar = tqdm(total=len(items), desc=desc, disable=not progress, leave=False)
    try:
        if workers == 1:
            results = []
            for item in items:
                results.append(func(item))
                bar.update(1)
            return results
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = []
            for result in pool.map(func, items):
                results.append(result)
                bar.update(1)
            return results
    finally:
        bar.close()


class Stopwatch:
    """Wall-clock timer for run manifests."""

    def __init__(self):
        self.start_time = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start_time
