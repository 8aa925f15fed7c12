"""Time-window batching.

Each category keeps a window of length ``floor(min relative deadline / 2)``.
Frames released in ``[joint - W, joint)`` are batched at ``joint`` into a job
whose relative deadline is ``W``, so every frame's deadline is at or after
its job's deadline. Frames released exactly at a joint belong to the next
window.
"""

from __future__ import annotations

import dataclasses
import itertools
from collections.abc import Callable
from dataclasses import dataclass, field

from .core import BatchKey, Frame, JobInstance, Request, Shape, Time
from .errors import (DegenerateDeadline, DuplicateRequest, EmptyCategory,
                     NotIdle, UnknownCategory)
from .profile import ExecutionProfile, split_sizes

DEFAULT_NONRT_WINDOW_US = 1_000_000
DEFAULT_NONRT_MIN_PERIOD_US = 100_000


def window_length(deadlines) -> int:
    deadlines = list(deadlines)
    if not deadlines:
        raise EmptyCategory("window length of an empty category")
    d = min(deadlines)
    if d < 2:
        raise DegenerateDeadline(f"relative deadline {d} us leaves no room for a window")
    return d // 2


def effective_request(request: Request, nonrt_min_period_us: int = DEFAULT_NONRT_MIN_PERIOD_US) -> Request:
    """Non-real-time requests are throttled to at least ``nonrt_min_period_us``."""
    if request.real_time or request.period_us >= nonrt_min_period_us:
        return request
    return dataclasses.replace(request, period_us=nonrt_min_period_us)


def joint_for(next_joint: Time, window: int, release: Time) -> Time:
    """Joint at which a frame released at ``release`` gets batched."""
    if release < next_joint:
        return next_joint
    return next_joint + ((release - next_joint) // window + 1) * window


def normalize_joint(next_joint: Time, window: int, now: Time) -> Time:
    """First joint strictly after ``now`` on the grid through ``next_joint``."""
    if next_joint > now:
        return next_joint
    return next_joint + ((now - next_joint) // window + 1) * window


@dataclass(frozen=True)
class RegistrationPlan:
    window_len_us: int
    next_joint_us: Time
    min_relative_deadline_us: int
    fresh: bool   # state created or a dormant state restarted
    flush: bool   # pending frames are batched at ``now`` before the reset


def plan_registration(request: Request, now: Time, *, window_len: int | None,
                      next_joint: Time | None, min_deadline: int | None,
                      dormant: bool, nonrt_window_us: int) -> RegistrationPlan:
    """Window parameters after admitting ``request`` at ``now``.

    Shared by the live batcher and the admission replay so both agree on every
    joint. A window shrink batches whatever is pending immediately and
    restarts the timer at ``now``.
    """
    if request.real_time:
        w_new = window_length([request.relative_deadline_us])
    else:
        w_new = nonrt_window_us
    if window_len is None or dormant:
        return RegistrationPlan(w_new, now + w_new, request.relative_deadline_us, True, False)
    new_min = min(min_deadline, request.relative_deadline_us)
    if request.real_time and w_new < window_len:
        return RegistrationPlan(w_new, now + w_new, new_min, False, True)
    return RegistrationPlan(window_len, next_joint, new_min, False, False)


@dataclass
class CategoryWindowState:
    key: BatchKey
    window_len_us: int
    next_joint_us: Time
    min_relative_deadline_us: int
    pending_frames: list[Frame] = field(default_factory=list)
    member_requests: dict[str, Request] = field(default_factory=dict)
    released: dict[str, int] = field(default_factory=dict)

    @property
    def real_time(self) -> bool:
        return self.key.real_time

    @property
    def category(self):
        return self.key.category

    def dormant(self) -> bool:
        """No pending frames and every member has released all its frames."""
        if self.pending_frames:
            return False
        return all(self.released[rid] >= r.num_frames for rid, r in self.member_requests.items())


class DisBatcher:
    """Live per-category window state.

    ``shape_for`` lets the adaptation module substitute a smaller shape for the
    profile lookup; job priorities are unaffected.
    """

    def __init__(self, profile: ExecutionProfile, *, nonrt_window_us: int = DEFAULT_NONRT_WINDOW_US,
                 shape_for: Callable[[BatchKey], Shape] | None = None,
                 job_ids: itertools.count | None = None) -> None:
        self.profile = profile
        self.nonrt_window_us = nonrt_window_us
        self.shape_for = shape_for
        self.states: dict[BatchKey, CategoryWindowState] = {}
        self._request_key: dict[str, BatchKey] = {}
        self._job_ids = job_ids if job_ids is not None else itertools.count()

    # -- registration -------------------------------------------------------

    def register_request(self, request: Request, now: Time) -> list[JobInstance]:
        """Add an admitted request. Returns jobs flushed by a window shrink."""
        if request.request_id in self._request_key:
            raise DuplicateRequest(request.request_id)
        key = request.key
        state = self.states.get(key)
        plan = plan_registration(
            request, now,
            window_len=state.window_len_us if state else None,
            next_joint=state.next_joint_us if state else None,
            min_deadline=state.min_relative_deadline_us if state else None,
            dormant=state.dormant() if state else False,
            nonrt_window_us=self.nonrt_window_us)
        flushed: list[JobInstance] = []
        if plan.fresh:
            state = CategoryWindowState(key, plan.window_len_us, plan.next_joint_us,
                                        plan.min_relative_deadline_us)
            self.states[key] = state
        else:
            if plan.flush and state.pending_frames:
                flushed = self._make_jobs(state, state.pending_frames, now, plan.window_len_us)
                state.pending_frames = []
            state.window_len_us = plan.window_len_us
            state.next_joint_us = plan.next_joint_us
            state.min_relative_deadline_us = plan.min_relative_deadline_us
        state.member_requests[request.request_id] = request
        state.released[request.request_id] = 0
        self._request_key[request.request_id] = key
        return flushed

    def register_nonrt_request(self, request: Request, now: Time,
                               nonrt_min_period_us: int = DEFAULT_NONRT_MIN_PERIOD_US) -> Request:
        """Register a non-real-time request; returns the throttled request whose
        frame stream the caller must feed."""
        if request.real_time:
            raise ValueError("register_nonrt_request expects a non-real-time request")
        eff = effective_request(request, nonrt_min_period_us)
        self.register_request(eff, now)
        return eff

    def state_of(self, request_id: str) -> CategoryWindowState:
        try:
            return self.states[self._request_key[request_id]]
        except KeyError:
            raise UnknownCategory(f"request {request_id} is not registered") from None

    # -- frames and windows --------------------------------------------------

    def enqueue_frame(self, frame: Frame, now: Time | None = None) -> None:
        state = self.state_of(frame.request_id)
        if not state.pending_frames and frame.release_us >= state.next_joint_us:
            # Empty windows in between produce no jobs; skip straight to the
            # window that contains this frame.
            state.next_joint_us = joint_for(state.next_joint_us, state.window_len_us, frame.release_us)
        state.pending_frames.append(frame)
        state.released[frame.request_id] += 1

    def next_due(self) -> Time | None:
        """Earliest joint of a category that has frames waiting."""
        due = [s.next_joint_us for s in self.states.values() if s.pending_frames]
        return min(due) if due else None

    def close_due(self, now: Time) -> list[JobInstance]:
        jobs: list[JobInstance] = []
        for key in sorted(self.states, key=lambda k: k.order):
            state = self.states[key]
            if state.pending_frames and state.next_joint_us <= now:
                jobs.extend(self.close_window(key, state.next_joint_us))
        return jobs

    def close_window(self, key: BatchKey, joint: Time) -> list[JobInstance]:
        """Batch the pending frames at ``joint`` and start the next window.

        More frames than the profile's max batch are split into several jobs
        with the same release and deadline.
        """
        state = self.states.get(key)
        if state is None:
            raise UnknownCategory(str(key))
        if joint != state.next_joint_us:
            raise ValueError(f"{key}: joint {joint} != next joint {state.next_joint_us}")
        jobs = []
        if state.pending_frames:
            jobs = self._make_jobs(state, state.pending_frames, joint, state.window_len_us)
            state.pending_frames = []
        state.next_joint_us = joint + state.window_len_us
        return jobs

    def early_candidate(self) -> BatchKey | None:
        """Category whose pending frames would get the earliest deadline."""
        best = None
        for key, s in self.states.items():
            if s.pending_frames:
                rank = (s.next_joint_us + s.window_len_us, key.order)
                if best is None or rank < best[0]:
                    best = (rank, key)
        return best[1] if best else None

    def early_dispatch(self, key: BatchKey, now: Time, *, worker_idle: bool,
                       queue_empty: bool) -> list[JobInstance]:
        """Batch a category's frames before its joint while the worker idles.

        The job keeps the deadline the frames would have received at the
        joint, so EDF priorities are unchanged.
        """
        if not (worker_idle and queue_empty):
            raise NotIdle("early dispatch needs an idle worker and an empty queue")
        state = self.states.get(key)
        if state is None:
            raise UnknownCategory(str(key))
        if not state.pending_frames:
            return []
        deadline = state.next_joint_us + state.window_len_us
        jobs = self._make_jobs(state, state.pending_frames, now, deadline - now)
        state.pending_frames = []
        return jobs

    def pending_count(self) -> int:
        return sum(len(s.pending_frames) for s in self.states.values())

    # -- helpers -------------------------------------------------------------

    def _make_jobs(self, state: CategoryWindowState, frames: list[Frame], release: Time,
                   rel_deadline: int) -> list[JobInstance]:
        cat = state.category
        model, shape = cat.model_id, cat.shape
        run_shape = self.shape_for(state.key) if self.shape_for else shape
        downgraded = run_shape != shape
        max_batch = self.profile.max_batch(model, shape)
        jobs = []
        start = 0
        for idx, size in enumerate(split_sizes(len(frames), max_batch)):
            chunk = tuple(frames[start:start + size])
            start += size
            nominal = self.profile.wcet(model, shape, size)
            wcet = self.profile.wcet(model, run_shape, size) if downgraded else nominal
            job = JobInstance(
                job_id=next(self._job_ids), category=cat, frames=chunk, release_us=release,
                relative_deadline_us=rel_deadline, wcet_us=wcet,
                tiebreak=(*state.key.order, idx), real_time=state.real_time,
                downgraded=downgraded, nominal_wcet_us=nominal if downgraded else None)
            if state.real_time:
                assert job.absolute_deadline_us <= min(f.absolute_deadline_us for f in chunk), \
                    f"window property violated for job {job.job_id} of {state.key}"
            jobs.append(job)
        return jobs
