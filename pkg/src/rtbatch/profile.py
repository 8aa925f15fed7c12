"""Worst-case execution time tables keyed by (model, shape, batch size).

The on-disk form is JSON lines, one record per (model, shape, batch size)::

    {"model": "rn50", "shape": [3, 224, 224], "batch_size": 1, "wcet_us": 3500}
"""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from pathlib import Path

from .core import Category, Duration, Shape
from .errors import (BatchTooLarge, DuplicateCategory, MonotonicityViolation,
                     ParseError, UnknownCategory)

# Single-model execution times (ms) at 3x224x224, batch 1, measured alone on
# an RTX 2080.
SOLO_MS_224 = {
    "rn50": 3.5,
    "rn101": 6.4,
    "rn152": 9.0,
    "vgg16": 4.5,
    "vgg19": 5.3,
    "inception": 9.3,
}

DOWNGRADE_AREA_RATIO = 0.25


class ExecutionProfile:
    """Immutable dense WCET table.

    For each (model, shape) the table holds WCETs for batch sizes
    ``1..max_batch``, non-decreasing in batch size.
    """

    def __init__(self, tables: dict[tuple[str, Shape], Iterable[int]] | None = None):
        self._tables: dict[tuple[str, Shape], tuple[int, ...]] = {}
        for (model, shape), wcets in (tables or {}).items():
            row = tuple(int(w) for w in wcets)
            if not row:
                raise ValueError(f"{model}@{shape}: empty table")
            for b in range(1, len(row)):
                if row[b] < row[b - 1]:
                    raise MonotonicityViolation(
                        f"{model}@{shape}: wcet({b + 1})={row[b]} < wcet({b})={row[b - 1]}")
            if row[0] < 0:
                raise ValueError(f"{model}@{shape}: negative wcet")
            self._tables[(model, shape)] = row

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExecutionProfile):
            return NotImplemented
        return self._tables == other._tables

    def __repr__(self) -> str:
        return f"ExecutionProfile({len(self._tables)} categories)"

    def __len__(self) -> int:
        return len(self._tables)

    def keys(self) -> list[tuple[str, Shape]]:
        return sorted(self._tables, key=lambda k: (k[0], k[1]))

    def has(self, model: str, shape: Shape) -> bool:
        return (model, shape) in self._tables

    def _row(self, model: str, shape: Shape) -> tuple[int, ...]:
        try:
            return self._tables[(model, shape)]
        except KeyError:
            raise UnknownCategory(f"no profile entry for {model}@{shape}") from None

    def max_batch(self, model: str, shape: Shape) -> int:
        return len(self._row(model, shape))

    def wcet(self, model: str, shape: Shape, batch_size: int) -> Duration:
        row = self._row(model, shape)
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if batch_size > len(row):
            raise BatchTooLarge(
                f"{model}@{shape}: batch {batch_size} exceeds max_batch {len(row)}")
        return row[batch_size - 1]

    def split_cost(self, model: str, shape: Shape, n: int) -> Duration:
        """Total WCET of ``n`` frames split into max-size chunks plus a remainder."""
        if n <= 0:
            return 0
        return sum(self.wcet(model, shape, b) for b in split_sizes(n, self.max_batch(model, shape)))

    def entries(self) -> Iterator[tuple[str, Shape, int, int]]:
        for model, shape in self.keys():
            for b, w in enumerate(self._tables[(model, shape)], start=1):
                yield model, shape, b, w


def split_sizes(n: int, max_batch: int) -> list[int]:
    """Chunk sizes used when a window holds more frames than ``max_batch``."""
    full, rem = divmod(n, max_batch)
    return [max_batch] * full + ([rem] if rem else [])


def lookup_wcet(profile: ExecutionProfile, category: Category, batch_size: int) -> Duration:
    return profile.wcet(category.model_id, category.shape, batch_size)


@dataclass(frozen=True)
class SynthRow:
    model: str
    shape: Shape
    base_us: int
    per_frame_us: int
    max_batch: int


def synth_profile(rows: Iterable[SynthRow | tuple], *, downgraded: bool = False) -> ExecutionProfile:
    """Affine profile ``wcet(b) = base_us + b * per_frame_us``.

    With ``downgraded=True`` every row also gets an entry for its halved
    shape (same base, per-frame cost scaled by the area ratio, rounded up)
    unless that shape is listed explicitly.
    """
    explicit: dict[tuple[str, Shape], list[int]] = {}
    parsed = [r if isinstance(r, SynthRow) else SynthRow(*r) for r in rows]
    for r in parsed:
        if r.base_us < 0 or r.per_frame_us < 0 or r.max_batch < 1:
            raise ValueError(f"invalid synth row {r}")
        key = (r.model, r.shape)
        if key in explicit:
            raise DuplicateCategory(f"duplicate profile row for {r.model}@{r.shape}")
        explicit[key] = [r.base_us + b * r.per_frame_us for b in range(1, r.max_batch + 1)]
    tables = dict(explicit)
    if downgraded:
        for r in parsed:
            half = r.shape.halved()
            key = (r.model, half)
            if key in tables:
                continue
            per = math.ceil(r.per_frame_us * half.area / r.shape.area)
            tables[key] = [r.base_us + b * per for b in range(1, r.max_batch + 1)]
    return ExecutionProfile(tables)


def reference_profile(shapes: Iterable[Shape] = (Shape(3, 224, 224),), *,
                      models: Iterable[str] | None = None, base_fraction: float = 0.6,
                      max_batch: int = 32, downgraded: bool = True) -> ExecutionProfile:
    """Affine profile anchored on the solo batch-1 timings in ``SOLO_MS_224``.

    At 3x224x224 the batch-1 entry equals the measured value; ``base_fraction``
    of it is fixed overhead and the rest scales with batch size and frame area.
    """
    ref_area = 224 * 224
    rows = []
    for model in (models or SOLO_MS_224):
        solo = round(SOLO_MS_224[model] * 1000)
        base = round(solo * base_fraction)
        per_ref = solo - base
        for shape in shapes:
            per = math.ceil(per_ref * shape.area / ref_area)
            rows.append(SynthRow(model, shape, base, per, max_batch))
    return synth_profile(rows, downgraded=downgraded)


def save_profile(profile: ExecutionProfile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for model, shape, b, w in profile.entries():
            rec = {"model": model, "shape": shape.as_list(), "batch_size": b, "wcet_us": w}
            fh.write(json.dumps(rec) + "\n")


def load_profile(path: str | Path) -> ExecutionProfile:
    raw: dict[tuple[str, Shape], dict[int, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                model = rec["model"]
                shape = Shape(*rec["shape"])
                b = rec["batch_size"]
                w = rec["wcet_us"]
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"bad profile record: {exc}", line=lineno) from None
            if not isinstance(model, str) or not isinstance(b, int) or not isinstance(w, int):
                raise ParseError("model must be a string, batch_size and wcet_us integers",
                                 line=lineno)
            if b < 1 or w < 0:
                raise ParseError(f"batch_size {b} / wcet_us {w} out of range", line=lineno)
            row = raw.setdefault((model, shape), {})
            if b in row:
                raise ParseError(f"duplicate entry {model}@{shape} batch {b}", line=lineno)
            row[b] = w
    tables = {}
    for (model, shape), row in raw.items():
        n = max(row)
        missing = [b for b in range(1, n + 1) if b not in row]
        if missing:
            raise ParseError(f"{model}@{shape}: missing batch sizes {missing[:5]}")
        tables[(model, shape)] = [row[b] for b in range(1, n + 1)]
    return ExecutionProfile(tables)
