import operator
from functools import partial

import pytest

from perclab.process_mgmt import ExperimentInterrupted, default_workers, shutdown_event
from perclab.runner import SampleRunner


def test_inline_results_in_order():
    assert SampleRunner().map(partial(operator.mul, 3), 5) == [0, 3, 6, 9, 12]


def test_input_checks():
    with pytest.raises(ValueError):
        SampleRunner(0)
    with pytest.raises(ValueError):
        SampleRunner().map(partial(operator.mul, 3), 0)


def test_interrupted_before_first_sample():
    shutdown_event.set()
    with pytest.raises(ExperimentInterrupted, match="0/3"):
        SampleRunner().map(partial(operator.mul, 3), 3)


def test_interrupted_midway():
    def task(i):
        if i == 1:
            shutdown_event.set()
        return i

    with pytest.raises(ExperimentInterrupted, match="2/4"):
        SampleRunner().map(task, 4)


def test_default_workers():
    assert default_workers() >= 1


@pytest.mark.slow
def test_pool_results_in_order():
    assert SampleRunner(2).map(partial(operator.mul, 3), 7) == [3 * i for i in range(7)]
