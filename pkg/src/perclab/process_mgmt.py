import threading

import psutil


shutdown_event = threading.Event()
"""
Set when the run should stop (SIGINT / SIGTERM)
"""


class ExperimentInterrupted(RuntimeError):
    """The shutdown event fired while samples were still pending"""

    pass


def default_workers() -> int:
    """
    Machine parallelism: physical cores if known, else logical ones, at least 1
    """
    return max(1, psutil.cpu_count(logical=False) or psutil.cpu_count() or 1)


def available_memory_mb() -> float:
    """
    Available system memory [MB], echoed to the run metadata
    """
    return psutil.virtual_memory().available / 2**20
