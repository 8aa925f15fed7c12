"""Independent reference implementations used only by the tests.

They are written from the definitions, deliberately without reusing the
package's scheduling code.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class J:
    """A job for the oracles: release, absolute deadline, execution time."""
    r: int
    d: int
    e: int
    tb: tuple = ()


def edf_schedule(jobs: list[J], start: int = 0) -> tuple[bool, list[int]]:
    """Non-preemptive EDF with the 'released strictly before the decision
    instant' rule; idle gaps jump to the next release and pick among jobs
    released exactly then. Returns (no miss, finish time per job)."""
    left = set(range(len(jobs)))
    finish = [0] * len(jobs)
    t = start
    ok = True
    while left:
        avail = [i for i in left if jobs[i].r < t]
        if not avail:
            t = max(t, min(jobs[i].r for i in left))
            avail = [i for i in left if jobs[i].r <= t]
        k = min(avail, key=lambda i: (jobs[i].d, jobs[i].r, jobs[i].tb, i))
        t += jobs[k].e
        finish[k] = t
        ok &= t <= jobs[k].d
        left.remove(k)
    return ok, finish


def any_feasible_nonidling(jobs: list[J]) -> bool:
    """Brute force over every non-idling order: whenever the processor is
    free it must start some released job; it may only wait when nothing is
    released."""

    def rec(left: frozenset, t: int) -> bool:
        if not left:
            return True
        ready = [i for i in left if jobs[i].r <= t]
        if not ready:
            t = min(jobs[i].r for i in left)
            ready = [i for i in left if jobs[i].r <= t]
        for i in ready:
            f = t + jobs[i].e
            if f <= jobs[i].d and rec(left - {i}, f):
                return True
        return False

    return rec(frozenset(range(len(jobs))), 0)


def windowed_jobs(requests, window: int, phase: int):
    """Batch a static request set on the window grid ``phase + k * window``.

    ``requests`` are (first_release, period, num_frames). A frame released at
    ``r`` belongs to the window ``[j - window, j)`` that contains it.
    Returns {joint: frame count}.
    """
    out: dict[int, int] = {}
    for first, period, n in requests:
        for s in range(n):
            r = first + s * period
            k = 1
            while phase + k * window <= r:
                k += 1
            out[phase + k * window] = out.get(phase + k * window, 0) + 1
    return out
