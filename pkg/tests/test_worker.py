import pytest
from hypothesis import given
from hypothesis import strategies as st

from rtbatch.core import Frame, JobInstance
from rtbatch.errors import EmptyQueue, WorkerBusy
from rtbatch.harness.execmodel import inject_overruns
from rtbatch.worker import (CompletionRecord, ExecutionQueue, Worker, detect_overrun,
                            exact_model, pop_earliest, push_job)

from conftest import RN50


def job(jid, release, rel_deadline, wcet=5_000, frames=None, tb=()):
    frames = frames or (Frame("a", jid, release, release + rel_deadline),)
    return JobInstance(jid, RN50, tuple(frames), release, rel_deadline, wcet, tb)


def test_pop_order_by_deadline():
    q = ExecutionQueue()
    for i, d in enumerate((150_000, 120_000, 200_000)):
        push_job(q, job(i, 0, d))
    assert [pop_earliest(q).absolute_deadline_us for _ in range(3)] == [120_000, 150_000, 200_000]


def test_tie_broken_by_release():
    q = ExecutionQueue()
    q.push(job(0, 10, 90))
    q.push(job(1, 5, 95))
    assert q.pop_earliest().release_us == 5


def test_pop_empty():
    with pytest.raises(EmptyQueue):
        ExecutionQueue().pop_earliest()


def test_execute_on_time():
    f = Frame("a", 0, 70_000, 170_000)
    w = Worker()
    rec = w.execute(job(1, 100_000, 50_000, 5_000, [f]), 100_000)
    (lat,) = rec.latencies
    assert (lat.l_qb_us, lat.l_qj_us, lat.l_e_us, lat.finish_us) == (30_000, 0, 5_000, 105_000)
    assert not rec.missed_job_deadline and not lat.missed
    with pytest.raises(WorkerBusy):
        w.execute(job(2, 0, 1), 100_000)
    assert w.complete() is rec and w.idle


def test_execute_late():
    f = Frame("a", 0, 100_000, 150_000)
    rec = Worker().execute(job(1, 100_000, 50_000, 5_000, [f]), 148_000)
    (lat,) = rec.latencies
    assert rec.finish_us == 153_000 and rec.missed_job_deadline
    assert lat.missed and lat.overdue_us == 3_000


def test_injected_excess():
    model = inject_overruns(exact_model, 0, 1, 10_000)
    rec = Worker(model).execute(job(1, 0, 50_000, 5_000), 0)
    assert rec.actual_exec_us == 15_000 and detect_overrun(rec) == 10_000


def _rec(actual, profiled):
    j = job(0, 0, 10, profiled)
    return CompletionRecord(j, 0, actual, actual, profiled, ())


def test_detect_overrun():
    assert detect_overrun(_rec(6_000, 5_000)) == 1_000
    assert detect_overrun(_rec(5_000, 5_000)) == 0
    assert detect_overrun(_rec(4_000, 5_000)) == 0


@given(st.lists(st.tuples(st.integers(0, 100), st.integers(0, 100)), min_size=1, max_size=30))
def test_queue_pops_sorted_keys(items):
    q = ExecutionQueue()
    jobs = [job(i, r, d) for i, (r, d) in enumerate(items)]
    for j in jobs:
        q.push(j)
    assert [j.sort_key for j in q] == sorted(j.sort_key for j in jobs)
    out = [q.pop_earliest().sort_key for _ in jobs]
    assert out == sorted(out)
    assert not q
