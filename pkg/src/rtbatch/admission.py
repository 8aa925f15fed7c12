"""Two-phase admission control.

Phase 1 is a quick utilization filter. Phase 2 snapshots the live system,
replays the batcher over every known future frame to get the exact list of
future jobs, and runs an EDF imitator over them: a clock-driven simulation of
the non-preemptive worker that reports whether any job would finish after
its deadline.
"""

from __future__ import annotations

import heapq
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

from .core import BatchKey, Frame, JobInstance, Request, Time
from .disbatcher import (joint_for, normalize_joint, plan_registration,
                         window_length)
from .errors import (BatchTooLarge, DegenerateDeadline, SchedError,
                     UnknownCategory, UnsortedInput)
from .profile import ExecutionProfile, split_sizes


# --------------------------------------------------------------------------
# Phase 1


@dataclass(frozen=True)
class CategoryLoad:
    window_us: int
    n_frames: int          # frames per window, floored
    utilization: Fraction  # 0 when n_frames == 0


@dataclass(frozen=True)
class UtilizationReport:
    per_category: dict[BatchKey, CategoryLoad]
    total: Fraction
    passed: bool
    reason: str = ""


def phase1(profile: ExecutionProfile, existing: Iterable[Request], pending: Request, *,
           windows: dict[BatchKey, int] | None = None,
           nonrt_window_us: int = 1_000_000) -> UtilizationReport:
    """Utilization filter over the post-admission request set.

    Per category: ``n = floor(sum(W / period))`` frames per window, estimated
    utilization ``E(n) / W``. Windows default to half the smallest deadline
    in the category; ``windows`` overrides them with the live values.
    Windows holding more than the profile's max batch are costed as split
    jobs.
    """
    by_key: dict[BatchKey, list[Request]] = {}
    for r in [*existing, pending]:
        by_key.setdefault(r.key, []).append(r)
    per_cat: dict[BatchKey, CategoryLoad] = {}
    total = Fraction(0)
    for key in sorted(by_key, key=lambda k: k.order):
        reqs = by_key[key]
        if not profile.has(key.category.model_id, key.category.shape):
            raise UnknownCategory(f"no profile entry for {key.category}")
        if windows and key in windows:
            w = windows[key]
        elif key.real_time:
            w = window_length(r.relative_deadline_us for r in reqs)
        else:
            w = nonrt_window_us
        n = math.floor(sum(Fraction(w, r.period_us) for r in reqs))
        if n == 0:
            u = Fraction(0)
        else:
            cat = key.category
            u = Fraction(profile.split_cost(cat.model_id, cat.shape, n), w)
        per_cat[key] = CategoryLoad(w, n, u)
        total += u
    passed = total <= 1
    reason = "" if passed else f"estimated utilization {float(total):.3f} > 1"
    return UtilizationReport(per_cat, total, passed, reason)


def phase1_frames(profile: ExecutionProfile, existing: Iterable[Request],
                  pending: Request) -> UtilizationReport:
    """Utilization filter for per-frame scheduling: sum of E(1) / period."""
    per_cat: dict[BatchKey, CategoryLoad] = {}
    total = Fraction(0)
    for r in [*existing, pending]:
        cat = r.category
        u = Fraction(profile.wcet(cat.model_id, cat.shape, 1), r.period_us)
        prev = per_cat.get(r.key)
        per_cat[r.key] = CategoryLoad(0, (prev.n_frames if prev else 0) + 1,
                                      (prev.utilization if prev else 0) + u)
        total += u
    passed = total <= 1
    return UtilizationReport(per_cat, total, passed,
                             "" if passed else f"utilization {float(total):.3f} > 1")


# --------------------------------------------------------------------------
# Snapshot


@dataclass(frozen=True, slots=True)
class PseudoJob:
    release_us: Time
    deadline_us: Time            # absolute
    wcet_us: int
    key: BatchKey
    tiebreak: tuple = ()
    frames: tuple[Frame, ...] = ()

    @property
    def ident(self) -> tuple:
        return (self.release_us, self.tiebreak)

    @property
    def priority(self) -> tuple:
        return (self.deadline_us, self.release_us, self.tiebreak)

    @property
    def list_order(self) -> tuple:
        return (self.release_us, self.deadline_us, self.tiebreak)

    @classmethod
    def from_job(cls, job: JobInstance, wcet_us: int | None = None) -> PseudoJob:
        return cls(job.release_us, job.absolute_deadline_us,
                   job.planned_wcet_us if wcet_us is None else wcet_us,
                   BatchKey(job.category, job.real_time), job.tiebreak, job.frames)


@dataclass(frozen=True)
class CategorySnapshot:
    key: BatchKey
    window_len_us: int
    next_joint_us: Time          # first joint strictly after ``now``
    min_relative_deadline_us: int
    pending: tuple[Frame, ...]
    dormant: bool


@dataclass(frozen=True)
class RequestSnapshot:
    request: Request
    next_seq: int

    @property
    def remaining(self) -> int:
        return self.request.num_frames - self.next_seq


@dataclass(frozen=True)
class SystemSnapshot:
    now: Time
    mode: str
    categories: tuple[CategorySnapshot, ...]
    queued: tuple[PseudoJob, ...]
    running: PseudoJob | None      # in-flight job with wcet = residual time
    requests: tuple[RequestSnapshot, ...]
    nonrt_window_us: int = 1_000_000

    def category(self, key: BatchKey) -> CategorySnapshot | None:
        for c in self.categories:
            if c.key == key:
                return c
        return None

    @property
    def pending_counts(self) -> dict[BatchKey, int]:
        return {c.key: len(c.pending) for c in self.categories}


def capture_state(system) -> SystemSnapshot:
    """Pure copy of the scheduler state at ``system.now``."""
    now = system.now
    cats = []
    if system.mode == "window":
        for key in sorted(system.batcher.states, key=lambda k: k.order):
            s = system.batcher.states[key]
            cats.append(CategorySnapshot(
                key, s.window_len_us, normalize_joint(s.next_joint_us, s.window_len_us, now),
                s.min_relative_deadline_us, tuple(s.pending_frames), s.dormant()))
    queued = tuple(PseudoJob.from_job(j) for j in system.queue)
    running = None
    cur = system.worker.current
    if cur is not None:
        # Residual time at the planned WCET; the worker cannot be preempted.
        planned_finish = cur.start_us + cur.job.planned_wcet_us
        running = PseudoJob.from_job(cur.job, wcet_us=max(0, planned_finish - now))
    reqs = tuple(RequestSnapshot(a.request, a.next_seq) for a in system.active_requests())
    return SystemSnapshot(now, system.mode, tuple(cats), queued, running, reqs,
                          system.nonrt_window_us)


# --------------------------------------------------------------------------
# Pseudo job generation


def _window_jobs(key: BatchKey, groups: dict[Time, list[Frame]], window: int,
                 profile: ExecutionProfile) -> list[PseudoJob]:
    cat = key.category
    max_batch = profile.max_batch(cat.model_id, cat.shape)
    jobs = []
    for joint in sorted(groups):
        frames = groups[joint]
        start = 0
        for idx, size in enumerate(split_sizes(len(frames), max_batch)):
            jobs.append(PseudoJob(joint, joint + window,
                                  profile.wcet(cat.model_id, cat.shape, size), key,
                                  (*key.order, idx), tuple(frames[start:start + size])))
            start += size
    return jobs


def generate_pseudo_jobs(snapshot: SystemSnapshot, pending: Request | None,
                         profile: ExecutionProfile) -> list[PseudoJob]:
    """Replay the batcher over all known future frames, pending included.

    Returns jobs ordered by (release, deadline, tiebreak), the order in which
    the imitator must see simultaneous releases to match the worker.
    """
    now = snapshot.now
    reqs = [(rs.request, rs.next_seq) for rs in snapshot.requests if rs.remaining > 0]
    if pending is not None:
        reqs.append((pending, 0))

    if snapshot.mode == "frame":
        jobs = []
        for req, nxt in reqs:
            cat = req.category
            e1 = profile.wcet(cat.model_id, cat.shape, 1)
            for seq in range(nxt, req.num_frames):
                f = req.frame(seq)
                jobs.append(PseudoJob(f.release_us, f.absolute_deadline_us, e1, req.key,
                                      (req.request_id, seq), (f,)))
        jobs.sort(key=lambda j: j.list_order)
        return jobs

    by_key: dict[BatchKey, list[tuple[int, Request, int]]] = {}
    for order, (req, nxt) in enumerate(reqs):
        by_key.setdefault(req.key, []).append((order, req, nxt))
    keys = {c.key for c in snapshot.categories} | set(by_key)

    per_cat: list[list[PseudoJob]] = []
    for key in sorted(keys, key=lambda k: k.order):
        cs = snapshot.category(key)
        pending_frames = list(cs.pending) if cs else []
        if cs is not None:
            window, joint = cs.window_len_us, cs.next_joint_us
        elif pending is None or pending.key != key:
            raise UnknownCategory(f"snapshot has requests but no window state for {key}")
        jobs: list[PseudoJob] = []
        if pending is not None and pending.key == key:
            plan = plan_registration(
                pending, now, window_len=cs.window_len_us if cs else None,
                next_joint=cs.next_joint_us if cs else None,
                min_deadline=cs.min_relative_deadline_us if cs else None,
                dormant=cs.dormant if cs else False, nonrt_window_us=snapshot.nonrt_window_us)
            if plan.flush and pending_frames:
                jobs.extend(_window_jobs(key, {now: pending_frames}, plan.window_len_us, profile))
                pending_frames = []
            window, joint = plan.window_len_us, plan.next_joint_us
        if not pending_frames and key not in by_key:
            per_cat.append(jobs)
            continue
        groups: dict[Time, list[Frame]] = {}
        if pending_frames:
            groups[joint] = list(pending_frames)
        future: list[tuple[Time, int, int]] = []
        for order, req, nxt in by_key.get(key, ()):
            future.extend((req.release_of(s), order, s) for s in range(nxt, req.num_frames))
        future.sort()
        reqs_by_order = {order: req for order, req, _ in by_key.get(key, ())}
        for r, order, s in future:
            groups.setdefault(joint_for(joint, window, r), []).append(reqs_by_order[order].frame(s))
        jobs.extend(_window_jobs(key, groups, window, profile))
        per_cat.append(jobs)
    return list(heapq.merge(*per_cat, key=lambda j: j.list_order))


# --------------------------------------------------------------------------
# EDF imitator


@dataclass
class ImitatorResult:
    schedulable: bool
    finish: dict[tuple, Time] = field(default_factory=dict)
    start: dict[tuple, Time] = field(default_factory=dict)
    first_miss: PseudoJob | None = None
    jobs: list[PseudoJob] = field(default_factory=list)


class EdfImitator:
    """Algorithm: clock ``t``, deadline queue ``Q``, future list ``L``.

    While Q or L is non-empty: if Q is empty, move the head of L into Q and
    jump ``t`` to its release; otherwise pop the earliest-deadline job,
    advance ``t`` by its execution time, fail if that passes its deadline,
    then move every job of L released strictly before ``t`` into Q.

    Jobs can be fed incrementally with :meth:`feed` (each batch sorted by
    release and not earlier than anything fed before); the imitator only
    makes decisions that no later job could change. :meth:`close` drains.
    """

    def __init__(self, start_us: Time = 0, seed: Iterable[PseudoJob] = (),
                 running: PseudoJob | None = None, *, stop_at_miss: bool = True) -> None:
        self.t = start_us
        self.stop_at_miss = stop_at_miss
        self.result = ImitatorResult(True)
        self._q: list[tuple[tuple, PseudoJob]] = []
        self._l: list[PseudoJob] = []
        self._li = 0
        self._max_release: Time | None = None
        self._closed = False
        self._done = False
        if running is not None:
            self.result.start[running.ident] = start_us
            self.t = start_us + running.wcet_us
            self.result.finish[running.ident] = self.t
            if self.t > running.deadline_us:
                self._miss(running)
        for job in seed:
            heapq.heappush(self._q, (job.priority, job))

    def _miss(self, job: PseudoJob) -> None:
        if self.result.schedulable:
            self.result.schedulable = False
            self.result.first_miss = job
        if self.stop_at_miss:
            self._done = True

    def feed(self, jobs: Sequence[PseudoJob]) -> None:
        if self._closed:
            raise RuntimeError("imitator already closed")
        last = self._max_release
        for j in jobs:
            if last is not None and j.release_us < last:
                raise UnsortedInput(f"release {j.release_us} after {last}")
            last = j.release_us
        if jobs:
            self._max_release = last
            # drop consumed prefix occasionally to keep memory flat
            if self._li > 4096 and self._li * 2 > len(self._l):
                del self._l[:self._li]
                self._li = 0
            self._l.extend(jobs)
        self._run()

    def close(self) -> ImitatorResult:
        self._closed = True
        self._run()
        return self.result

    def _known_before(self, t: Time) -> bool:
        """True when no unseen job can be released strictly before ``t``."""
        return self._closed or (self._max_release is not None and self._max_release >= t)

    def _run(self) -> None:
        q, l = self._q, self._l
        res = self.result
        while not self._done:
            if not q:
                if self._li >= len(l):
                    return
                head = l[self._li]
                # a later batch might add a simultaneous release that sorts first
                if not self._closed and self._max_release <= head.release_us:
                    return
                self._li += 1
                heapq.heappush(q, (head.priority, head))
                # max() only matters behind a running job's residual
                self.t = max(self.t, head.release_us)
                continue
            if not self._known_before(self.t):
                return
            while self._li < len(l) and l[self._li].release_us < self.t:
                job = l[self._li]
                self._li += 1
                heapq.heappush(q, (job.priority, job))
            _, job = heapq.heappop(q)
            res.start[job.ident] = self.t
            self.t += job.wcet_us
            res.finish[job.ident] = self.t
            if self.t > job.deadline_us:
                self._miss(job)
                if self._done:
                    return
            while self._li < len(l) and l[self._li].release_us < self.t:
                nxt = l[self._li]
                self._li += 1
                heapq.heappush(q, (nxt.priority, nxt))


def edf_imitator(queue_seed: Iterable[PseudoJob], future: Sequence[PseudoJob], *,
                 start_us: Time = 0, running: PseudoJob | None = None,
                 stop_at_miss: bool = True) -> ImitatorResult:
    for a, b in zip(future, future[1:]):
        if b.release_us < a.release_us:
            raise UnsortedInput(f"future jobs not sorted by release ({a.release_us} > {b.release_us})")
    imi = EdfImitator(start_us, queue_seed, running, stop_at_miss=stop_at_miss)
    imi.feed(future)
    return imi.close()


# --------------------------------------------------------------------------
# Admission


@dataclass
class AdmissionResult:
    request_id: str
    admitted: bool
    phase: int                       # 0 admitted, 1 or 2 rejecting phase
    reason: str = ""
    utilization: Fraction | None = None
    report: UtilizationReport | None = None
    predicted_finish: dict[tuple, Time] = field(default_factory=dict)
    predicted_max_latency_us: int | None = None
    at_us: Time = 0

    @property
    def decision(self) -> str:
        return "admitted" if self.admitted else f"rejected({self.phase})"


def _live_windows(snapshot: SystemSnapshot, pending: Request) -> dict[BatchKey, int]:
    windows = {c.key: c.window_len_us for c in snapshot.categories if not c.dormant}
    cs = snapshot.category(pending.key)
    plan = plan_registration(
        pending, snapshot.now, window_len=cs.window_len_us if cs else None,
        next_joint=cs.next_joint_us if cs else None,
        min_deadline=cs.min_relative_deadline_us if cs else None,
        dormant=cs.dormant if cs else False, nonrt_window_us=snapshot.nonrt_window_us)
    windows[pending.key] = plan.window_len_us
    return windows


def phase2(snapshot: SystemSnapshot, pending: Request | None,
           profile: ExecutionProfile) -> ImitatorResult:
    future = generate_pseudo_jobs(snapshot, pending, profile)
    # Jobs released at the current instant are already competing for the worker.
    cut = 0
    while cut < len(future) and future[cut].release_us <= snapshot.now:
        cut += 1
    seed = [*snapshot.queued, *future[:cut]]
    result = edf_imitator(seed, future[cut:], start_us=snapshot.now, running=snapshot.running)
    result.jobs = future
    return result


def admit(system, profile: ExecutionProfile, pending: Request, *,
          skip_phase1: bool = False) -> AdmissionResult:
    """Decide whether ``pending`` can join ``system`` without deadline misses.

    Does not register the request; the caller does that on admission.
    """
    rid = pending.request_id
    snapshot = capture_state(system)
    existing = [rs.request for rs in snapshot.requests]
    report = None
    try:
        if snapshot.mode == "window":
            report = phase1(profile, existing, pending, windows=_live_windows(snapshot, pending),
                            nonrt_window_us=snapshot.nonrt_window_us)
        else:
            report = phase1_frames(profile, existing, pending)
    except (UnknownCategory, BatchTooLarge, DegenerateDeadline) as exc:
        return AdmissionResult(rid, False, 1, str(exc), at_us=snapshot.now)
    if not report.passed and not skip_phase1:
        return AdmissionResult(rid, False, 1, report.reason, report.total, report, at_us=snapshot.now)
    try:
        result = phase2(snapshot, pending, profile)
    except SchedError as exc:
        return AdmissionResult(rid, False, 2, str(exc), report.total, report, at_us=snapshot.now)
    if not result.schedulable:
        miss = result.first_miss
        why = (f"job released at {miss.release_us} for {miss.key} finishes "
               f"{result.finish[miss.ident]} > deadline {miss.deadline_us}")
        return AdmissionResult(rid, False, 2, why, report.total, report, at_us=snapshot.now)
    max_lat = None
    for job in result.jobs:
        fin = result.finish.get(job.ident)
        for f in job.frames:
            if f.request_id == rid and fin is not None:
                lat = fin - f.release_us
                max_lat = lat if max_lat is None else max(max_lat, lat)
    return AdmissionResult(rid, True, 0, "", report.total, report, dict(result.finish), max_lat,
                           at_us=snapshot.now)
