import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from ..config.settings import parallel_num


logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def gather_in_batches(
    func: Callable[[T], R],
    items: Sequence[T],
    batch_size: int = parallel_num,
    label: str = "items",
) -> List[R]:
    """
    Run a blocking function over items, ``batch_size`` at a time, in worker threads.

    Args:
        func: Function applied to each item
        items: Inputs
        batch_size: Concurrent calls per batch (PARALLEL_NUM)
        label: Noun used in progress logs

    Returns:
        List[R]: Results in input order
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")

    total_batches = (len(items) + batch_size - 1) // batch_size
    results: List[R] = []

    for batch_index in range(0, len(items), batch_size):
        batch_items = items[batch_index:batch_index + batch_size]
        current_batch = (batch_index // batch_size) + 1
        if total_batches > 1:
            logger.debug(f"Processing batch {current_batch}/{total_batches}: {len(batch_items)} {label}")

        batch_task_list = [asyncio.create_task(asyncio.to_thread(func, item)) for item in batch_items]
        results.extend(await asyncio.gather(*batch_task_list))

    return results


def run_in_batches(
    func: Callable[[T], R],
    items: Sequence[T],
    batch_size: int = parallel_num,
    label: str = "items",
) -> List[R]:
    """Synchronous entry to ``gather_in_batches`` for library callers."""
    items = list(items)
    if not items:
        return []
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(gather_in_batches(func, items, batch_size=batch_size, label=label))

    # Inside a running loop: run on a private loop in a helper thread
    with ThreadPoolExecutor(max_workers=1) as executor:
        coroutine = gather_in_batches(func, items, batch_size=batch_size, label=label)
        return executor.submit(asyncio.run, coroutine).result()
