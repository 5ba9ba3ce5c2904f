"""
oqs_eom/worker.py
Thread-pool map over independent work items (frequency chunks, epsilon values).
"""

from typing import Callable, Iterable, List, Optional, TypeVar
import asyncio
import logging

from oqs_eom.config import Config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def _map_async(func: Callable[[T], R], items: List[T], threads: int) -> List[R]:
    semaphore = asyncio.Semaphore(threads)

    async def run(item: T) -> R:
        async with semaphore:
            return await asyncio.to_thread(func, item)

    # gather keeps submission order, so results do not depend on scheduling
    return await asyncio.gather(*(run(item) for item in items))


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Apply func to every item, using up to `threads` worker threads.

    numpy releases the GIL inside LAPACK calls, so chunks of batched solves
    overlap for real. Results come back in input order.
    """
    threads = Config.THREADS if threads is None else threads
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    logger.debug(f"🚀 Dispatching {len(items)} work items over {threads} threads")
    return asyncio.run(_map_async(func, items, threads))


def chunked(values, size: int) -> list:
    return [values[i:i + size] for i in range(0, len(values), size)]
