"""
Test the jobs process pool.
"""
import math

import pytest

from zeros_lab.jobs import JobFailed, Jobs


@pytest.mark.order(index=450)
def test_wait_results():
    """Values of every job are returned by wait."""
    with Jobs(nb_executors=2) as jobs:
        jobs.start(paused=True)
        for n in range(5):
            jobs.add_job_once("factorial_{}".format(n), math.factorial, args=(n,))
        jobs.resume()
        results = jobs.wait(["factorial_{}".format(n) for n in range(5)], poll=0.05)
        jobs.shutdown()
    assert results == {"factorial_{}".format(n): math.factorial(n) for n in range(5)}


@pytest.mark.order(index=451)
def test_job_failed():
    """Exceptions raised in workers are reported."""
    with Jobs(nb_executors=1) as jobs:
        jobs.start()
        jobs.add_job_once("bad", math.factorial, args=(-1,))
        with pytest.raises(JobFailed):
            jobs.wait(["bad"], poll=0.05)
        jobs.shutdown()
