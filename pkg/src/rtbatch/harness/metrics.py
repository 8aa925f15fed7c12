"""Per-frame records, aggregate metrics and their file formats."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from ..core import LatencyRecord, Request

FRAME_COLUMNS = ("frame_id", "request_id", "release_us", "batch_release_us", "start_us",
                 "finish_us", "deadline_us", "missed", "overdue_us")


@dataclass
class Metrics:
    policy: str
    records: list[LatencyRecord]
    frames: int
    rt_frames: int
    missed: int
    miss_rate: float
    overdue_us: list[int]          # sorted, missed real-time frames only
    makespan_us: int
    throughput_fps: float
    admitted: int = 0
    rejected_phase1: int = 0
    rejected_phase2: int = 0
    peak_concurrent: int = 0
    jobs: list = field(default_factory=list)         # CompletionRecords, start order
    admissions: list = field(default_factory=list)   # AdmissionResults, arrival order
    extra: dict = field(default_factory=dict)

    def overdue_quantile(self, q: float) -> int:
        return quantile(self.overdue_us, q)

    def summary(self) -> dict:
        return {
            "policy": self.policy,
            "miss_rate": self.miss_rate,
            "throughput_fps": self.throughput_fps,
            "admitted": self.admitted,
            "rejected_phase1": self.rejected_phase1,
            "rejected_phase2": self.rejected_phase2,
            "frames": self.frames,
            "missed": self.missed,
            "makespan_us": self.makespan_us,
            "peak_concurrent": self.peak_concurrent,
            "overdue_p50_us": self.overdue_quantile(0.5),
            "overdue_p90_us": self.overdue_quantile(0.9),
            "overdue_p99_us": self.overdue_quantile(0.99),
        }


def quantile(sorted_values: Sequence[int], q: float) -> int:
    """Nearest-rank quantile; 0 for an empty sample."""
    if not sorted_values:
        return 0
    k = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[min(k, len(sorted_values)) - 1]


def peak_concurrency(requests: Iterable[Request]) -> int:
    events = []
    for r in requests:
        events.append((r.first_release_us, 1))
        events.append((r.last_release_us, -1))
    # starts before ends at equal times: touching streams count as concurrent
    events.sort(key=lambda e: (e[0], -e[1]))
    cur = peak = 0
    for _, d in events:
        cur += d
        peak = max(peak, cur)
    return peak


def compute_metrics(records: Iterable[LatencyRecord], *, policy: str = "",
                    admitted: Sequence[Request] = (), rejected_phase1: int = 0,
                    rejected_phase2: int = 0) -> Metrics:
    recs = sorted(records, key=lambda r: (r.frame.release_us, r.frame.request_id, r.frame.seq))
    rt = [r for r in recs if r.real_time]
    missed = [r for r in rt if r.missed]
    if recs:
        makespan = max(r.finish_us for r in recs) - min(r.frame.release_us for r in recs)
    else:
        makespan = 0
    throughput = len(recs) / (makespan / 1e6) if makespan > 0 else 0.0
    return Metrics(
        policy=policy, records=recs, frames=len(recs), rt_frames=len(rt), missed=len(missed),
        miss_rate=len(missed) / len(rt) if rt else 0.0,
        overdue_us=sorted(r.overdue_us for r in missed), makespan_us=makespan,
        throughput_fps=throughput, admitted=len(admitted), rejected_phase1=rejected_phase1,
        rejected_phase2=rejected_phase2, peak_concurrent=peak_concurrency(admitted))


def write_frames_csv(metrics: Metrics, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_COLUMNS)
        for r in metrics.records:
            f = r.frame
            w.writerow((f.frame_id, f.request_id, f.release_us, r.batch_release_us, r.start_us,
                        r.finish_us, f.absolute_deadline_us, int(r.missed), r.overdue_us))


def write_summary(metrics: Metrics, path: str | Path) -> None:
    Path(path).write_text(json.dumps(metrics.summary(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_outputs(metrics: Metrics, outdir: str | Path) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_frames_csv(metrics, out / "frames.csv")
    write_summary(metrics, out / "summary.json")
