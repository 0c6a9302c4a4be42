import math

import pytest

from services.batch_runner import BatchRunner


@pytest.mark.parametrize('jobs', [1, 3])
def test_results_keep_insertion_order(jobs):
    runner = BatchRunner(jobs)
    for n in (5, 3, 4):
        runner.add_job(math.factorial, n, job_id=f"fact-{n}")
    assert runner.run_all() == [('fact-5', 120), ('fact-3', 6), ('fact-4', 24)]


@pytest.mark.parametrize('jobs', [1, 2])
def test_failures_are_returned(jobs):
    runner = BatchRunner(jobs)
    runner.add_job(math.factorial, 3)
    runner.add_job(math.factorial, -1)
    (first, value), (second, error) = runner.run_all()
    assert (first, value) == ('job_0', 6)
    assert second == 'job_1'
    assert isinstance(error, ValueError)


def test_remove_job():
    runner = BatchRunner()
    job_id = runner.add_job(math.factorial, 2)
    runner.remove_job(job_id)
    runner.remove_job('missing')
    assert runner.run_all() == []


def test_rejects_zero_jobs():
    with pytest.raises(ValueError):
        BatchRunner(0)
