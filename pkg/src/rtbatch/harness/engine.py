"""Discrete-event simulation of one policy over one trace.

For the deadline-driven policies (DeepRT and SEDF) every instant ``t`` is
processed in a fixed order:

1. a job finishing at ``t`` completes (adaptation sees the result);
2. an idle worker takes the earliest-deadline job released before ``t``;
3. windows whose joint is ``t`` close and push their jobs;
4. requests arriving at ``t`` go through admission and get registered;
5. frames released at ``t`` reach the batcher;
6. an idle worker takes the earliest-deadline job;
7. optionally, an idle worker with nothing queued batches a category early.

Steps 2 and 6 together give exactly the order the admission imitator
assumes, which is what makes its predictions exact.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from collections import deque
from collections.abc import Sequence
from dataclasses import dataclass
from typing import ClassVar

from ..adaptation import Adaptation
from ..admission import AdmissionResult, admit
from ..core import BatchKey, Request
from ..disbatcher import (DEFAULT_NONRT_MIN_PERIOD_US, DEFAULT_NONRT_WINDOW_US,
                          effective_request)
from ..errors import InvalidConfig
from ..profile import ExecutionProfile
from ..system import LiveSystem
from ..worker import CompletionRecord, ExecModel, exact_model
from .baselines import run_gps
from .metrics import Metrics, compute_metrics


@dataclass(frozen=True)
class DeepRT:
    name: ClassVar[str] = "deeprt"


@dataclass(frozen=True)
class SEDF:
    name: ClassVar[str] = "sedf"


@dataclass(frozen=True)
class AIMD:
    name: ClassVar[str] = "aimd"
    slo_us: int | None = None          # None: the smallest frame deadline in the batch
    additive_step: int = 1
    multiplicative_factor: float = 0.5
    initial_batch: int = 1

    def __post_init__(self) -> None:
        if self.slo_us is not None and self.slo_us <= 0:
            raise InvalidConfig("AIMD slo must be > 0")
        if self.additive_step <= 0 or self.initial_batch <= 0:
            raise InvalidConfig("AIMD step and initial batch must be > 0")
        if not 0.0 < self.multiplicative_factor < 1.0:
            raise InvalidConfig("AIMD multiplicative factor must be in (0, 1)")


@dataclass(frozen=True)
class Batch:
    name: ClassVar[str] = "batch"
    fixed_size: int = 2

    def __post_init__(self) -> None:
        if self.fixed_size <= 0:
            raise InvalidConfig("batch size must be > 0")


@dataclass(frozen=True)
class BatchDelay:
    name: ClassVar[str] = "batch-delay"
    fixed_size: int = 4
    max_delay_us: int = 10_000

    def __post_init__(self) -> None:
        if self.fixed_size <= 0 or self.max_delay_us <= 0:
            raise InvalidConfig("batch size and max delay must be > 0")


PolicyConfig = DeepRT | SEDF | AIMD | Batch | BatchDelay
POLICIES = {p.name: p for p in (DeepRT, SEDF, AIMD, Batch, BatchDelay)}


def policy_from_name(name: str) -> PolicyConfig:
    try:
        return POLICIES[name.strip().lower()]()
    except KeyError:
        raise InvalidConfig(f"unknown policy {name!r}; choose from {', '.join(POLICIES)}") from None


@dataclass(frozen=True)
class SimOptions:
    early_dispatch: bool = True
    adaptation: bool = True
    replay_admitted: frozenset[str] | None = None   # serve exactly these ids, no admission
    nonrt_window_us: int = DEFAULT_NONRT_WINDOW_US
    nonrt_min_period_us: int = DEFAULT_NONRT_MIN_PERIOD_US
    skip_phase1: bool = False
    max_consecutive_rejections: int | None = None   # saturation runs stop offering after this


def run_simulation(trace: Sequence[Request], policy: PolicyConfig, profile: ExecutionProfile,
                   exec_model: ExecModel | None = None,
                   options: SimOptions | None = None) -> Metrics:
    opt = options or SimOptions()
    requests = list(trace)
    if opt.replay_admitted is not None:
        requests = [r for r in requests if r.request_id in opt.replay_admitted]
    if isinstance(policy, (DeepRT, SEDF)):
        return _run_edf(requests, policy, profile, exec_model or exact_model, opt)
    if exec_model not in (None, exact_model):
        raise InvalidConfig(f"{policy.name} runs on profiled times only")
    records = run_gps(requests, policy, profile)
    return compute_metrics(records, policy=policy.name, admitted=requests)


def _run_edf(trace: list[Request], policy: PolicyConfig, profile: ExecutionProfile,
             exec_model: ExecModel, opt: SimOptions) -> Metrics:
    mode = "frame" if isinstance(policy, SEDF) else "window"
    adapt = Adaptation(profile) if opt.adaptation and mode == "window" else None
    system = LiveSystem(profile, mode=mode, nonrt_window_us=opt.nonrt_window_us,
                        exec_model=exec_model,
                        shape_for=adapt.effective_shape if adapt else None)
    replay = opt.replay_admitted is not None
    arrivals = deque(sorted(enumerate(trace), key=lambda p: (p[1].first_release_us, p[0])))
    releases: list[tuple[int, int, str]] = []   # (release, admission order, request id)
    records = []
    jobs: list[CompletionRecord] = []
    admissions: list[AdmissionResult] = []
    admitted: list[Request] = []
    rejected = {1: 0, 2: 0}
    streak = 0
    offered = 0
    worker, queue, batcher = system.worker, system.queue, system.batcher

    def dispatch(t: int) -> None:
        if worker.idle and queue:
            worker.execute(queue.pop_earliest(), t)

    while True:
        cands = []
        if worker.current is not None:
            cands.append(worker.current.finish_us)
        due = batcher.next_due()
        if due is not None:
            cands.append(due)
        if arrivals:
            cands.append(arrivals[0][1].first_release_us)
        if releases:
            cands.append(releases[0][0])
        if not cands:
            break
        t = min(cands)
        system.now = t

        if worker.current is not None and worker.current.finish_us == t:
            rec = worker.complete()
            records.extend(rec.latencies)
            jobs.append(rec)
            if adapt is not None:
                _adapt(adapt, rec)
        dispatch(t)
        for job in batcher.close_due(t):
            queue.push(job)

        while arrivals and arrivals[0][1].first_release_us == t:
            _, req = arrivals.popleft()
            if mode == "window" and not req.real_time:
                req = effective_request(req, opt.nonrt_min_period_us)
            if not replay:
                offered += 1
                res = admit(system, profile, req, skip_phase1=opt.skip_phase1)
                admissions.append(res)
                if not res.admitted:
                    rejected[res.phase] += 1
                    streak += 1
                    if opt.max_consecutive_rejections and streak >= opt.max_consecutive_rejections:
                        arrivals.clear()
                    continue
                streak = 0
            system.register(req)
            admitted.append(req)
            heapq.heappush(releases, (req.first_release_us, len(admitted), req.request_id))

        while releases and releases[0][0] == t:
            _, order, rid = heapq.heappop(releases)
            system.release_frame(rid)
            nxt = system.requests[rid].next_release_us
            if nxt is not None:
                heapq.heappush(releases, (nxt, order, rid))
        dispatch(t)

        if opt.early_dispatch and mode == "window" and worker.idle and not queue:
            key = batcher.early_candidate()
            if key is not None:
                for job in batcher.early_dispatch(key, t, worker_idle=True, queue_empty=True):
                    queue.push(job)
                dispatch(t)

    assert batcher.pending_count() == 0 and not queue, "simulation stopped with work left"
    m = compute_metrics(records, policy=policy.name, admitted=admitted,
                        rejected_phase1=rejected[1], rejected_phase2=rejected[2])
    m.jobs = jobs
    m.admissions = admissions
    m.extra["offered"] = offered if not replay else len(trace)
    if adapt is not None:
        m.extra["final_penalty_us"] = adapt.total_penalty()
        m.extra["downgraded_at_end"] = adapt.any_downgraded()
        m.extra["adaptation_events"] = len(adapt.log)
    return m


def _adapt(adapt: Adaptation, rec: CompletionRecord) -> None:
    job = rec.job
    key = BatchKey(job.category, job.real_time)
    if rec.actual_exec_us > job.wcet_us:
        adapt.on_completion(key, rec.actual_exec_us - job.wcet_us)
    elif job.downgraded:
        saving = job.planned_wcet_us - rec.actual_exec_us
        if saving > 0:
            adapt.on_completion(key, -saving)


def admitted_ids(metrics: Metrics) -> frozenset[str]:
    return frozenset(a.request_id for a in metrics.admissions if a.admitted)


def prediction_mismatches(metrics: Metrics) -> list[tuple[tuple, int, int | None]]:
    """Jobs whose finish differs from the latest admission's prediction.

    A job is compared with the last successful admission made no later than
    its start; later admissions only change jobs that start after them.
    Returns ``(job ident, actual finish, predicted finish or None)``.
    """
    adm = [a for a in metrics.admissions if a.admitted]
    times = [a.at_us for a in adm]
    bad = []
    for rec in metrics.jobs:
        i = bisect_right(times, rec.start_us) - 1
        pred = adm[i].predicted_finish.get(rec.job.ident) if i >= 0 else None
        if pred != rec.finish_us:
            bad.append((rec.job.ident, rec.finish_us, pred))
    return bad
