"""Domain types shared by the batcher, worker, admission test and harness.

All times are integer microseconds. Nothing in the scheduling path rounds;
rounding only happens when traces or profiles are ingested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

Time = int
Duration = int


@dataclass(frozen=True, slots=True, order=True)
class Shape:
    channels: int
    height: int
    width: int

    def __post_init__(self) -> None:
        if min(self.channels, self.height, self.width) < 1:
            raise ValueError(f"shape dimensions must be >= 1, got {self}")

    @classmethod
    def parse(cls, text: str) -> Shape:
        """Parse ``"3x224x224"``."""
        parts = text.lower().split("x")
        if len(parts) != 3:
            raise ValueError(f"expected CxHxW, got {text!r}")
        return cls(*(int(p) for p in parts))

    def halved(self) -> Shape:
        return Shape(self.channels, max(1, self.height // 2), max(1, self.width // 2))

    @property
    def area(self) -> int:
        return self.height * self.width

    def as_list(self) -> list[int]:
        return [self.channels, self.height, self.width]

    def __str__(self) -> str:
        return f"{self.channels}x{self.height}x{self.width}"


@dataclass(frozen=True, slots=True, order=True)
class Category:
    """A (model, shape) pair. Only frames of equal category share a batch."""

    model_id: str
    shape: Shape

    @property
    def order(self) -> tuple:
        s = self.shape
        return (self.model_id, s.channels, s.height, s.width)

    def __str__(self) -> str:
        return f"{self.model_id}@{self.shape}"


class BatchKey(NamedTuple):
    """Identity of one window state: real-time and non-real-time streams of
    the same category never share windows."""

    category: Category
    real_time: bool

    @property
    def order(self) -> tuple:
        return (*self.category.order, 0 if self.real_time else 1)

    def __str__(self) -> str:
        return str(self.category) + ("" if self.real_time else "/nrt")


@dataclass(frozen=True, slots=True)
class Request:
    request_id: str
    category: Category
    period_us: Duration
    relative_deadline_us: Duration
    num_frames: int
    first_release_us: Time = 0
    real_time: bool = True

    def __post_init__(self) -> None:
        if self.period_us <= 0:
            raise ValueError(f"{self.request_id}: period must be > 0")
        if self.relative_deadline_us <= 0:
            raise ValueError(f"{self.request_id}: deadline must be > 0")
        if self.num_frames < 1:
            raise ValueError(f"{self.request_id}: num_frames must be >= 1")
        if self.first_release_us < 0:
            raise ValueError(f"{self.request_id}: negative first release")

    @property
    def key(self) -> BatchKey:
        return BatchKey(self.category, self.real_time)

    def release_of(self, seq: int) -> Time:
        return self.first_release_us + seq * self.period_us

    @property
    def last_release_us(self) -> Time:
        return self.release_of(self.num_frames - 1)

    def frame(self, seq: int) -> Frame:
        r = self.release_of(seq)
        return Frame(self.request_id, seq, r, r + self.relative_deadline_us)


@dataclass(frozen=True, slots=True)
class Frame:
    request_id: str
    seq: int
    release_us: Time
    absolute_deadline_us: Time

    @property
    def frame_id(self) -> str:
        return f"{self.request_id}:{self.seq}"


@dataclass(frozen=True, slots=True)
class JobInstance:
    """A batch of same-category frames.

    ``tiebreak`` completes the EDF priority key after (deadline, release);
    the imitator builds identical tiebreaks so its pop order matches the
    worker's.
    """

    job_id: int
    category: Category
    frames: tuple[Frame, ...]
    release_us: Time
    relative_deadline_us: Duration
    wcet_us: Duration
    tiebreak: tuple = ()
    real_time: bool = True
    downgraded: bool = False
    nominal_wcet_us: Duration | None = None

    def __post_init__(self) -> None:
        if not self.frames:
            raise ValueError("a job instance needs at least one frame")

    @property
    def absolute_deadline_us(self) -> Time:
        return self.release_us + self.relative_deadline_us

    @property
    def batch_size(self) -> int:
        return len(self.frames)

    @property
    def ident(self) -> tuple:
        return (self.release_us, self.tiebreak)

    @property
    def sort_key(self) -> tuple:
        return (self.absolute_deadline_us, self.release_us, self.tiebreak, self.job_id)

    @property
    def planned_wcet_us(self) -> Duration:
        """WCET at the original shape (differs from wcet_us when downgraded)."""
        return self.wcet_us if self.nominal_wcet_us is None else self.nominal_wcet_us


@dataclass(frozen=True, slots=True)
class LatencyRecord:
    frame: Frame
    l_qb_us: Duration
    l_qj_us: Duration
    l_e_us: Duration
    start_us: Time
    finish_us: Time
    batch_release_us: Time
    real_time: bool = True
    missed: bool = field(init=False)
    overdue_us: Duration = field(init=False)

    def __post_init__(self) -> None:
        overdue = self.finish_us - self.frame.absolute_deadline_us
        object.__setattr__(self, "missed", overdue > 0)
        object.__setattr__(self, "overdue_us", max(0, overdue))

    @property
    def latency_us(self) -> Duration:
        return self.l_qb_us + self.l_qj_us + self.l_e_us


def frame_stream(request: Request) -> list[Frame]:
    """All frames of ``request`` in release order."""
    return [request.frame(i) for i in range(request.num_frames)]
