"""Asynchronous worker pool that evaluates independent jobs on a thread executor."""

import asyncio
import logging
import os
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Generic, Optional, TypeVar

logger = logging.getLogger(__name__)

JobT = TypeVar("JobT")
ResultT = TypeVar("ResultT")


def available_parallelism() -> int:
    """CPUs this process may run on."""
    if hasattr(os, "sched_getaffinity"):
        return max(1, len(os.sched_getaffinity(0)))
    return os.cpu_count() or 1


async def async_worker(
    worker_id: int,
    job_queue: asyncio.Queue,  # type: ignore[type-arg]
    handler: Callable[[Any], Any],
    executor: ThreadPoolExecutor,
    results: list[Any],
    failures: list[tuple[int, BaseException]],
) -> None:
    """Fetch (index, job) pairs from the queue and store each result at its index.

    Args:
        worker_id: Identifier for the worker
        job_queue: The queue to fetch jobs from
        handler: Blocking function run on the executor for each job
        executor: Executor the handler runs on
        results: Output slots, one per job index
        failures: Collects (index, exception) for jobs that raised
    """
    logger.debug(f"Worker {worker_id} started.")
    loop = asyncio.get_running_loop()
    try:
        while True:
            index, job = await job_queue.get()
            logger.debug(f"[Worker {worker_id}] Processing job {index}...")
            try:
                results[index] = await loop.run_in_executor(executor, handler, job)
                logger.debug(f"[Worker {worker_id}] Finished job {index}.")
            except Exception as e:
                logger.error(f"[Worker {worker_id}] Error processing job {index}: {e}")
                failures.append((index, e))
            finally:
                job_queue.task_done()
    except asyncio.CancelledError:
        logger.debug(f"Worker {worker_id} task cancelled.")
        raise


def create_worker_pool(
    worker_count: int,
    job_queue: asyncio.Queue,  # type: ignore[type-arg]
    handler: Callable[[Any], Any],
    executor: ThreadPoolExecutor,
    results: list[Any],
    failures: list[tuple[int, BaseException]],
) -> list[asyncio.Task]:  # type: ignore[type-arg]
    """Create a pool of worker tasks.

    Returns:
        List of worker tasks named ``worker-1`` .. ``worker-N``
    """
    return [
        asyncio.create_task(
            async_worker(i + 1, job_queue, handler, executor, results, failures),
            name=f"worker-{i + 1}",
        )
        for i in range(worker_count)
    ]


class JobRunner(Generic[JobT, ResultT]):
    """Runs a blocking handler over a list of jobs with bounded parallelism.

    Results come back in job order regardless of which worker finished first.

    Example:
        >>> async def main():
        ...     async with JobRunner(handler, threads=4) as runner:
        ...         results = await runner.run(jobs)
    """

    def __init__(self, handler: Callable[[JobT], ResultT], threads: Optional[int] = None):
        """Initialize the runner.

        Args:
            handler: Blocking function evaluated once per job
            threads: Worker and executor size (defaults to the available parallelism)
        """
        if threads is not None and threads < 1:
            raise ValueError(f"threads must be >= 1, got {threads}")
        self.handler = handler
        self.threads = threads or available_parallelism()
        self.executor: Optional[ThreadPoolExecutor] = None

    async def __aenter__(self) -> "JobRunner[JobT, ResultT]":
        self.executor = ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="satqkd")
        return self

    async def __aexit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None

    async def run(self, jobs: Sequence[JobT]) -> list[ResultT]:
        """Evaluate every job and return the results in job order.

        Raises:
            RuntimeError: If the runner is used outside ``async with``
            Exception: The exception of the lowest-indexed failed job
        """
        if self.executor is None:
            raise RuntimeError("Runner not initialized. Use 'async with JobRunner(...)'")

        job_queue: asyncio.Queue = asyncio.Queue()  # type: ignore[type-arg]
        for index, job in enumerate(jobs):
            job_queue.put_nowait((index, job))
        results: list[Any] = [None] * len(jobs)
        failures: list[tuple[int, BaseException]] = []

        worker_count = min(self.threads, max(1, len(jobs)))
        logger.info(f"Starting {len(jobs)} jobs on {worker_count} workers...")
        workers = create_worker_pool(worker_count, job_queue, self.handler, self.executor, results, failures)
        try:
            await job_queue.join()
        finally:
            for task in workers:
                task.cancel()
            await asyncio.gather(*workers, return_exceptions=True)

        if failures:
            raise min(failures, key=lambda failure: failure[0])[1]
        logger.info(f"Finished {len(jobs)} jobs.")
        return results

    @classmethod
    def run_jobs(
        cls, handler: Callable[[JobT], ResultT], jobs: Sequence[JobT], threads: Optional[int] = None
    ) -> list[ResultT]:
        """Run ``jobs`` to completion from synchronous code."""

        async def _main() -> list[ResultT]:
            async with cls(handler, threads) as runner:
                return await runner.run(jobs)

        return asyncio.run(_main())
