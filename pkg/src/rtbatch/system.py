"""Live scheduler state: batcher + EDF queue + worker + admitted requests."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .core import Frame, JobInstance, Request, Time
from .disbatcher import DEFAULT_NONRT_WINDOW_US, DisBatcher
from .errors import DuplicateRequest, UnknownCategory
from .profile import ExecutionProfile
from .worker import ExecModel, ExecutionQueue, Worker


class FrameBatcher:
    """Batch-size-1 front end: every frame becomes its own job at release.

    Used by the sequential-EDF comparison scheduler.
    """

    def __init__(self, profile: ExecutionProfile, job_ids: itertools.count | None = None) -> None:
        self.profile = profile
        self.requests: dict[str, Request] = {}
        self._job_ids = job_ids if job_ids is not None else itertools.count()
        self._emitted: list[JobInstance] = []

    def register_request(self, request: Request, now: Time) -> list[JobInstance]:
        if request.request_id in self.requests:
            raise DuplicateRequest(request.request_id)
        self.requests[request.request_id] = request
        return []

    def enqueue_frame(self, frame: Frame, now: Time | None = None) -> None:
        try:
            req = self.requests[frame.request_id]
        except KeyError:
            raise UnknownCategory(f"request {frame.request_id} is not registered") from None
        cat = req.category
        self._emitted.append(JobInstance(
            job_id=next(self._job_ids), category=cat, frames=(frame,), release_us=frame.release_us,
            relative_deadline_us=req.relative_deadline_us,
            wcet_us=self.profile.wcet(cat.model_id, cat.shape, 1),
            tiebreak=(frame.request_id, frame.seq), real_time=req.real_time))

    def take_released(self) -> list[JobInstance]:
        jobs, self._emitted = self._emitted, []
        return jobs

    def next_due(self) -> Time | None:
        return None

    def close_due(self, now: Time) -> list[JobInstance]:
        return []

    def early_candidate(self):
        return None

    def pending_count(self) -> int:
        return len(self._emitted)


@dataclass
class ActiveRequest:
    request: Request       # as registered (non-RT requests already throttled)
    order: int             # admission order, breaks ties between same-time frames
    next_seq: int = 0

    @property
    def remaining(self) -> int:
        return self.request.num_frames - self.next_seq

    @property
    def next_release_us(self) -> Time | None:
        return self.request.release_of(self.next_seq) if self.remaining else None


class LiveSystem:
    """Everything the admission test snapshots and the engine mutates.

    ``mode`` is ``"window"`` for time-window batching or ``"frame"`` for
    per-frame sequential EDF.
    """

    def __init__(self, profile: ExecutionProfile, *, mode: str = "window",
                 nonrt_window_us: int = DEFAULT_NONRT_WINDOW_US,
                 exec_model: ExecModel | None = None, shape_for=None) -> None:
        if mode not in ("window", "frame"):
            raise ValueError(f"unknown mode {mode!r}")
        self.profile = profile
        self.mode = mode
        self.nonrt_window_us = nonrt_window_us
        self.now: Time = 0
        job_ids = itertools.count()
        if mode == "window":
            self.batcher = DisBatcher(profile, nonrt_window_us=nonrt_window_us,
                                      shape_for=shape_for, job_ids=job_ids)
        else:
            self.batcher = FrameBatcher(profile, job_ids=job_ids)
        self.queue = ExecutionQueue()
        self.worker = Worker(exec_model)
        self.requests: dict[str, ActiveRequest] = {}

    def register(self, request: Request) -> None:
        flushed = self.batcher.register_request(request, self.now)
        self.requests[request.request_id] = ActiveRequest(request, len(self.requests))
        for job in flushed:
            self.queue.push(job)

    def release_frame(self, request_id: str) -> Frame:
        active = self.requests[request_id]
        frame = active.request.frame(active.next_seq)
        active.next_seq += 1
        self.batcher.enqueue_frame(frame, self.now)
        if self.mode == "frame":
            for job in self.batcher.take_released():
                self.queue.push(job)
        return frame

    def active_requests(self) -> list[ActiveRequest]:
        """Requests with frames still to be released, in admission order."""
        return [a for a in self.requests.values() if a.remaining > 0]
