from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from multiprocessing import get_context
from typing import Callable, TypeVar

from .misc import PROGRESS_STEPS
from .process_mgmt import ExperimentInterrupted, shutdown_event
from .project_logger import getMainLogger, initWorkerLogger

T = TypeVar("T")


class SampleRunner:
    """
    Maps a per-sample task over sample indices 0..n-1, inline or on a pool of spawned worker
    processes. Results always come back in sample-index order.
    """

    _logger = getMainLogger()

    def __init__(self, workers: int = 1):
        """
        [workers] == 1 runs every sample in the calling process
        """
        if workers < 1:
            raise ValueError(f"Worker count must be >= 1, got {workers}")
        self.workers = workers

    def _progress(self, label: str, done: int, n: int):
        step = max(1, n // PROGRESS_STEPS)
        if done % step == 0 or done == n:
            self._logger.info(f"{label}: {done}/{n} samples")

    def map(self, task: Callable[[int], T], n: int, label: str = "samples") -> list[T]:
        """
        Run [task] on every sample index. The task must be picklable (module-level function
        or functools.partial of one) when more than one worker is used.

        Raises:
            ExperimentInterrupted: the shutdown event fired before all samples finished
        """
        if n < 1:
            raise ValueError(f"Sample count must be >= 1, got {n}")
        if self.workers == 1 or n == 1:
            results = []
            for i in range(n):
                if shutdown_event.is_set():
                    raise ExperimentInterrupted(f"{label}: interrupted after {i}/{n} samples")
                results.append(task(i))
                self._progress(label, i + 1, n)
            return results

        results: list = [None] * n
        pool = ProcessPoolExecutor(
            max_workers=min(self.workers, n),
            mp_context=get_context("spawn"),
            initializer=initWorkerLogger,
        )
        self._logger.debug(f"{label}: started pool of {min(self.workers, n)} workers")
        try:
            futures = {pool.submit(task, i): i for i in range(n)}
            pending = set(futures)
            done_count = 0
            while pending:
                done, pending = wait(pending, timeout=0.5, return_when=FIRST_COMPLETED)
                for future in done:
                    results[futures[future]] = future.result()
                    done_count += 1
                    self._progress(label, done_count, n)
                if shutdown_event.is_set():
                    for future in pending:
                        future.cancel()
                    raise ExperimentInterrupted(
                        f"{label}: interrupted after {done_count}/{n} samples"
                    )
        finally:
            pool.shutdown(wait=True, cancel_futures=True)
        return results
