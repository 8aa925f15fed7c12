"""Comparison schedulers without admission control: AIMD, BATCH, BATCH-Delay.

Each category executes one batch at a time in FIFO order. Categories with a
batch in flight share the processor equally (generalized processor sharing):
with ``c`` of them running, each progresses at rate ``1/c``. Times are kept
as exact fractions of a microsecond and rounded up when recorded.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from ..core import BatchKey, Frame, LatencyRecord, Request
from ..profile import ExecutionProfile


def aimd_step(current_batch: int, observed_latency_us: int, slo_us: int, *,
              additive_step: int = 1, multiplicative_factor: float = 0.5,
              max_batch: int | None = None) -> int:
    if current_batch < 1:
        raise ValueError("batch size must be >= 1")
    if observed_latency_us <= slo_us:
        new = current_batch + additive_step
    else:
        new = max(1, math.floor(current_batch * multiplicative_factor))
    return min(new, max_batch) if max_batch is not None else new


@dataclass
class BatchState:
    """Frames of one category waiting to be batched."""
    fixed_size: int
    max_delay_us: int | None = None
    pending: deque = field(default_factory=deque)
    exhausted: bool = False   # no further frames are expected for now


def batch_policy_dispatch(state: BatchState, now: int) -> tuple[Frame, ...] | None:
    """BATCH: emit once ``fixed_size`` frames wait, or the remainder when the
    category has no more frames coming."""
    if len(state.pending) >= state.fixed_size or (state.exhausted and state.pending):
        n = min(state.fixed_size, len(state.pending))
        return tuple(state.pending.popleft() for _ in range(n))
    return None


def batch_delay_dispatch(state: BatchState, now: int) -> tuple[Frame, ...] | None:
    """BATCH-Delay: emit when full or when the oldest frame has waited
    ``max_delay_us``, whichever comes first."""
    if not state.pending:
        return None
    full = len(state.pending) >= state.fixed_size
    if full or now - state.pending[0].release_us >= state.max_delay_us:
        n = min(state.fixed_size, len(state.pending))
        return tuple(state.pending.popleft() for _ in range(n))
    return None


@dataclass
class _Batch:
    frames: tuple[Frame, ...]
    formed: Fraction
    work: int
    remaining: Fraction
    start: Fraction | None = None


@dataclass
class _Cat:
    key: BatchKey
    forming: BatchState
    ready: deque = field(default_factory=deque)
    running: _Batch | None = None
    batch: int = 1            # AIMD's current size
    live: int = 0             # member requests with frames still to release


def _ceil(x: Fraction) -> int:
    return math.ceil(x)


def run_gps(trace: list[Request], policy, profile: ExecutionProfile) -> list[LatencyRecord]:
    """Simulate one baseline over ``trace`` (every request is served)."""
    from .engine import AIMD, Batch, BatchDelay   # avoid an import cycle

    cats: dict[BatchKey, _Cat] = {}
    arrivals = deque(sorted(enumerate(trace), key=lambda p: (p[1].first_release_us, p[0])))
    releases: list[tuple[int, int, str, int]] = []   # (time, order, request id, seq)
    by_id: dict[str, Request] = {}
    records: list[LatencyRecord] = []
    now = Fraction(0)
    is_aimd = isinstance(policy, AIMD)

    def cat_for(req: Request) -> _Cat:
        c = cats.get(req.key)
        if c is None:
            if isinstance(policy, Batch):
                st = BatchState(policy.fixed_size)
            elif isinstance(policy, BatchDelay):
                st = BatchState(policy.fixed_size, policy.max_delay_us)
            else:
                st = BatchState(1)
            c = cats[req.key] = _Cat(req.key, st, batch=getattr(policy, "initial_batch", 1))
        return c

    def max_batch(c: _Cat) -> int:
        return profile.max_batch(c.key.category.model_id, c.key.category.shape)

    def enqueue(c: _Cat, frames: tuple[Frame, ...], t: Fraction) -> None:
        cat = c.key.category
        mb = max_batch(c)
        for i in range(0, len(frames), mb):
            chunk = frames[i:i + mb]
            w = profile.wcet(cat.model_id, cat.shape, len(chunk))
            c.ready.append(_Batch(chunk, t, w, Fraction(w)))

    def form(t: Fraction) -> None:
        for key in sorted(cats, key=lambda k: k.order):
            c = cats[key]
            st = c.forming
            if is_aimd:
                if c.running is None and not c.ready and st.pending:
                    n = min(c.batch, len(st.pending))
                    enqueue(c, tuple(st.pending.popleft() for _ in range(n)), t)
                continue
            st.exhausted = c.live == 0
            rule = batch_delay_dispatch if st.max_delay_us is not None else batch_policy_dispatch
            while (frames := rule(st, t)) is not None:
                enqueue(c, frames, t)

    def start_ready(t: Fraction) -> None:
        for c in cats.values():
            if c.running is None and c.ready:
                b = c.ready.popleft()
                b.start = t
                c.running = b

    def complete(c: _Cat, t: Fraction) -> None:
        b = c.running
        c.running = None
        start, fin, formed = _ceil(b.start), _ceil(t), _ceil(b.formed)
        for f in b.frames:
            records.append(LatencyRecord(f, formed - f.release_us, start - formed, fin - start,
                                         start, fin, formed, c.key.real_time))
        if is_aimd:
            observed = max(fin - f.release_us for f in b.frames)
            slo = policy.slo_us
            if slo is None:
                slo = min(f.absolute_deadline_us - f.release_us for f in b.frames)
            c.batch = aimd_step(c.batch, observed, slo, additive_step=policy.additive_step,
                                multiplicative_factor=policy.multiplicative_factor,
                                max_batch=max_batch(c))

    while True:
        running = [c for c in cats.values() if c.running is not None]
        cands: list[Fraction] = []
        if running:
            share = len(running)
            cands.append(now + min(c.running.remaining for c in running) * share)
        if arrivals:
            cands.append(Fraction(arrivals[0][1].first_release_us))
        if releases:
            cands.append(Fraction(releases[0][0]))
        for c in cats.values():
            st = c.forming
            if st.max_delay_us is not None and st.pending:
                cands.append(Fraction(st.pending[0].release_us + st.max_delay_us))
        if not cands:
            break
        t = min(cands)
        if running:
            progress = (t - now) / len(running)
            for c in running:
                c.running.remaining -= progress
        now = t
        for key in sorted(cats, key=lambda k: k.order):
            c = cats[key]
            if c.running is not None and c.running.remaining <= 0:
                complete(c, t)
        while arrivals and arrivals[0][1].first_release_us == t:
            order, req = arrivals.popleft()
            by_id[req.request_id] = req
            cat_for(req).live += 1
            heapq.heappush(releases, (req.first_release_us, order, req.request_id, 0))
        while releases and releases[0][0] == t:
            _, order, rid, seq = heapq.heappop(releases)
            req = by_id[rid]
            c = cats[req.key]
            c.forming.pending.append(req.frame(seq))
            if seq + 1 < req.num_frames:
                heapq.heappush(releases, (req.release_of(seq + 1), order, rid, seq + 1))
            else:
                c.live -= 1
        form(t)
        start_ready(t)
    return records
