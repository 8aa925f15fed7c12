"""Execution-time models for the simulated worker.

A model maps ``(job, index)`` to the job's actual execution time, where
``index`` counts jobs started so far. Models are deterministic functions of
their seed and the start order.
"""

from __future__ import annotations

import numpy as np

from ..core import JobInstance
from ..worker import ExecModel, exact_model

__all__ = ["exact_model", "jitter_model", "inject_overruns", "parse_inject"]


def jitter_model(seed: int, max_speedup: float = 0.1, base: ExecModel = exact_model) -> ExecModel:
    """Actual time uniformly in ``[(1 - max_speedup) * base, base]``.

    Never exceeds the base model, so a WCET-based base never overruns.
    """
    if not 0.0 <= max_speedup < 1.0:
        raise ValueError("max_speedup must be in [0, 1)")
    rng = np.random.default_rng(seed)
    memo: dict[int, float] = {}

    def model(job: JobInstance, index: int) -> int:
        # draws are keyed by start index so repeated queries agree
        while len(memo) <= index:
            memo[len(memo)] = float(rng.random())
        full = base(job, index)
        return full - int(full * max_speedup * memo[index])

    return model


def inject_overruns(base: ExecModel, start_job_index: int, count: int = 5,
                    extra_us: int = 0) -> ExecModel:
    """Add ``extra_us`` to jobs ``start_job_index .. start_job_index + count - 1``."""
    if extra_us == 0 or count <= 0:
        return base
    stop = start_job_index + count

    def model(job: JobInstance, index: int) -> int:
        t = base(job, index)
        return t + extra_us if start_job_index <= index < stop else t

    return model


def parse_inject(text: str) -> tuple[int, int, int]:
    """``"start:count:extra_us"`` -> tuple of ints."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected start:count:extra_us, got {text!r}")
    start, count, extra = (int(p) for p in parts)
    if start < 0 or count < 0 or extra < 0:
        raise ValueError(f"negative value in {text!r}")
    return start, count, extra
