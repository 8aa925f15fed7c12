"""Synthetic request traces.

Periods and relative deadlines are drawn independently from Gamma(k=2,
theta=5) and rescaled by one common factor each so their sample means hit the
configured means. Randomness comes from ``numpy.random.default_rng(seed)``
(PCG64 bit generator, numpy's Marsaglia-Tsang gamma sampler), drawn in this
fixed order: periods, deadlines, category indices, frame counts, arrival gaps,
real-time coin flips.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import Category, Request, Shape
from ..errors import InvalidConfig, ParseError

DESKTOP_SHAPES = (Shape(3, 1080, 1920), Shape(3, 480, 854), Shape(3, 240, 352))
DESKTOP_MODELS = ("rn50", "rn101", "rn152", "vgg16", "vgg19", "inception")
DESKTOP_POOL: tuple[tuple[str, Shape], ...] = tuple(
    (m, s) for m in DESKTOP_MODELS for s in DESKTOP_SHAPES)


@dataclass(frozen=True)
class TraceConfig:
    seed: int = 0
    num_requests: int = 25
    mean_period_us: int = 50_000
    mean_deadline_us: int = 50_000
    gamma_shape: float = 2.0
    gamma_scale: float = 5.0
    arrival: str = "exponential"            # or "fixed"
    arrival_interval_us: int = 200_000      # mean gap between request arrivals
    categories: tuple[tuple[str, Shape], ...] = DESKTOP_POOL
    frames_per_request: int | tuple[int, int] = 40
    nonrt_fraction: float = 0.0
    start_us: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        if self.num_requests < 0:
            raise InvalidConfig("num_requests must be >= 0")
        if self.mean_period_us <= 0 or self.mean_deadline_us <= 0:
            raise InvalidConfig("mean period and deadline must be > 0")
        if self.gamma_shape <= 0 or self.gamma_scale <= 0:
            raise InvalidConfig("gamma parameters must be > 0")
        if self.arrival not in ("fixed", "exponential"):
            raise InvalidConfig(f"unknown arrival model {self.arrival!r}")
        if self.arrival_interval_us < 0:
            raise InvalidConfig("arrival interval must be >= 0")
        if not self.categories:
            raise InvalidConfig("empty category pool")
        if not 0.0 <= self.nonrt_fraction <= 1.0:
            raise InvalidConfig("nonrt_fraction must be in [0, 1]")
        lo, hi = self.frame_range
        if lo < 1 or hi < lo:
            raise InvalidConfig(f"bad frames_per_request {self.frames_per_request}")

    @property
    def frame_range(self) -> tuple[int, int]:
        f = self.frames_per_request
        return (f, f) if isinstance(f, int) else (int(f[0]), int(f[1]))


def _scaled(samples: np.ndarray, mean: int, floor: int) -> list[int]:
    factor = mean / samples.mean()
    return [max(floor, int(round(x * factor))) for x in samples]


def gen_trace(config: TraceConfig) -> list[Request]:
    config.validate()
    n = config.num_requests
    if n == 0:
        return []
    rng = np.random.default_rng(config.seed)
    periods = _scaled(rng.gamma(config.gamma_shape, config.gamma_scale, n), config.mean_period_us, 1)
    deadlines = _scaled(rng.gamma(config.gamma_shape, config.gamma_scale, n),
                        config.mean_deadline_us, 2)
    cats = rng.integers(0, len(config.categories), n)
    lo, hi = config.frame_range
    frames = rng.integers(lo, hi + 1, n)
    if config.arrival == "fixed":
        gaps = np.full(n, config.arrival_interval_us, dtype=float)
    else:
        gaps = rng.exponential(config.arrival_interval_us, n) if config.arrival_interval_us else np.zeros(n)
    nonrt = rng.random(n) < config.nonrt_fraction
    out = []
    t = config.start_us
    for i in range(n):
        if i:
            t += int(round(gaps[i]))
        model, shape = config.categories[int(cats[i])]
        out.append(Request(f"r{i:03d}", Category(model, shape), periods[i], deadlines[i],
                           int(frames[i]), t, not bool(nonrt[i])))
    return out


def desktop_config(trace_no: int, **overrides) -> TraceConfig:
    """Trace 1/2/3 with period and deadline means of 50/150/250 ms."""
    mean = {1: 50_000, 2: 150_000, 3: 250_000}[trace_no]
    params = dict(mean_period_us=mean, mean_deadline_us=mean, arrival_interval_us=4 * mean)
    params.update(overrides)
    return TraceConfig(**params)


def request_to_dict(r: Request) -> dict:
    return {"id": r.request_id, "model": r.category.model_id, "shape": r.category.shape.as_list(),
            "period_us": r.period_us, "deadline_us": r.relative_deadline_us,
            "num_frames": r.num_frames, "first_release_us": r.first_release_us,
            "real_time": r.real_time}


def request_from_dict(d: dict) -> Request:
    return Request(str(d["id"]), Category(str(d["model"]), Shape(*d["shape"])),
                   int(d["period_us"]), int(d["deadline_us"]), int(d["num_frames"]),
                   int(d.get("first_release_us", 0)), bool(d.get("real_time", True)))


def save_trace(requests: Sequence[Request], path: str | Path) -> None:
    doc = {"requests": [request_to_dict(r) for r in requests]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_trace(path: str | Path) -> list[Request]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("requests"), list):
        raise ParseError(f"{path}: expected an object with a 'requests' array")
    out = []
    for i, d in enumerate(doc["requests"]):
        try:
            out.append(request_from_dict(d))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: request #{i}: {exc}") from None
    ids = [r.request_id for r in out]
    if len(set(ids)) != len(ids):
        raise ParseError(f"{path}: duplicate request ids")
    return out
