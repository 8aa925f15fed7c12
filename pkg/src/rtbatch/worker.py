"""Deadline-ordered execution queue and the non-preemptive worker."""

from __future__ import annotations

import heapq
from collections.abc import Callable, Iterator
from dataclasses import dataclass

from .core import Duration, JobInstance, LatencyRecord, Time
from .errors import EmptyQueue, WorkerBusy

# (job, ordinal of the job among all jobs started so far) -> actual execution time
ExecModel = Callable[[JobInstance, int], Duration]


def exact_model(job: JobInstance, index: int) -> Duration:
    return job.wcet_us


class ExecutionQueue:
    """Min-heap on (absolute deadline, release, tiebreak, job id)."""

    def __init__(self) -> None:
        self._heap: list[tuple[tuple, JobInstance]] = []

    def push(self, job: JobInstance) -> None:
        heapq.heappush(self._heap, (job.sort_key, job))

    def pop_earliest(self) -> JobInstance:
        if not self._heap:
            raise EmptyQueue("pop from an empty execution queue")
        return heapq.heappop(self._heap)[1]

    def peek(self) -> JobInstance | None:
        return self._heap[0][1] if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)

    def __iter__(self) -> Iterator[JobInstance]:
        """Jobs in priority order (does not consume the queue)."""
        return (job for _, job in sorted(self._heap))


def push_job(queue: ExecutionQueue, job: JobInstance) -> None:
    queue.push(job)


def pop_earliest(queue: ExecutionQueue) -> JobInstance:
    return queue.pop_earliest()


@dataclass(frozen=True)
class CompletionRecord:
    job: JobInstance
    start_us: Time
    finish_us: Time
    actual_exec_us: Duration
    profiled_wcet_us: Duration
    latencies: tuple[LatencyRecord, ...]
    index: int = 0

    @property
    def job_id(self) -> int:
        return self.job.job_id

    @property
    def missed_job_deadline(self) -> bool:
        return self.finish_us > self.job.absolute_deadline_us


def detect_overrun(record: CompletionRecord) -> Duration:
    return max(0, record.actual_exec_us - record.profiled_wcet_us)


class Worker:
    """Executes one job at a time; a started job runs to completion."""

    def __init__(self, exec_model: ExecModel | None = None) -> None:
        self.exec_model = exec_model or exact_model
        self.current: CompletionRecord | None = None
        self.started = 0

    @property
    def idle(self) -> bool:
        return self.current is None

    @property
    def busy_until(self) -> Time | None:
        return self.current.finish_us if self.current else None

    def execute(self, job: JobInstance, now: Time, exec_model: ExecModel | None = None) -> CompletionRecord:
        if self.current is not None:
            raise WorkerBusy(f"job {self.current.job_id} runs until {self.current.finish_us}")
        if now < job.release_us:
            raise ValueError(f"job {job.job_id} started at {now} before its release {job.release_us}")
        model = exec_model or self.exec_model
        actual = int(model(job, self.started))
        if actual < 0:
            raise ValueError("execution model returned a negative duration")
        finish = now + actual
        lat = tuple(
            LatencyRecord(frame=f, l_qb_us=job.release_us - f.release_us,
                          l_qj_us=now - job.release_us, l_e_us=actual, start_us=now,
                          finish_us=finish, batch_release_us=job.release_us,
                          real_time=job.real_time)
            for f in job.frames)
        rec = CompletionRecord(job, now, finish, actual, job.wcet_us, lat, self.started)
        self.started += 1
        self.current = rec
        return rec

    def complete(self) -> CompletionRecord:
        rec = self.current
        if rec is None:
            raise RuntimeError("worker is idle")
        self.current = None
        return rec
