"""Overrun penalties and one-step resolution downgrade.

A category that overruns its profiled WCET accumulates the excess as a
penalty and is switched to half resolution. Jobs run at the smaller shape
pay the penalty back with the time they save against the original WCET;
once it reaches zero the original shape is restored.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .core import BatchKey, Shape
from .errors import UnknownCategory
from .profile import ExecutionProfile


class AdaptAction(enum.Enum):
    NONE = "none"
    DOWNGRADE = "downgrade"
    RESTORE = "restore"


@dataclass
class PenaltyState:
    original_shape: Shape
    downgraded_shape: Shape
    penalty_us: int = 0
    downgraded: bool = False


class Adaptation:
    """Per-category penalty book.

    Categories are registered lazily from ``profile``: a category can only
    downgrade when the profile has its half-resolution entry.
    """

    def __init__(self, profile: ExecutionProfile | None = None) -> None:
        self.profile = profile
        self.states: dict[BatchKey, PenaltyState] = {}
        self.log: list[tuple[BatchKey, AdaptAction, int]] = []

    def track(self, key: BatchKey) -> PenaltyState:
        st = self.states.get(key)
        if st is None:
            shape = key.category.shape
            st = self.states[key] = PenaltyState(shape, shape.halved())
        return st

    def _can_downgrade(self, key: BatchKey, st: PenaltyState) -> bool:
        if st.downgraded_shape == st.original_shape:
            return False
        if self.profile is None:
            return True
        return self.profile.has(key.category.model_id, st.downgraded_shape)

    def on_completion(self, key: BatchKey, excess_or_saving: int) -> AdaptAction:
        """Positive values are overrun excess, negative values are savings
        reported by downgraded jobs."""
        st = self.states.get(key)
        if st is None:
            if self.profile is None:
                raise UnknownCategory(str(key))
            st = self.track(key)
        action = AdaptAction.NONE
        if excess_or_saving > 0:
            if not st.downgraded:
                if not self._can_downgrade(key, st):
                    return AdaptAction.NONE
                st.downgraded = True
                action = AdaptAction.DOWNGRADE
            st.penalty_us += excess_or_saving
        elif excess_or_saving < 0 and st.downgraded:
            st.penalty_us += excess_or_saving
            if st.penalty_us <= 0:
                st.penalty_us = 0
                st.downgraded = False
                action = AdaptAction.RESTORE
        if action is not AdaptAction.NONE:
            self.log.append((key, action, st.penalty_us))
        return action

    def effective_shape(self, key: BatchKey) -> Shape:
        st = self.states.get(key)
        if st is None or not st.downgraded:
            return key.category.shape
        return st.downgraded_shape

    def total_penalty(self) -> int:
        return sum(s.penalty_us for s in self.states.values())

    def any_downgraded(self) -> bool:
        return any(s.downgraded for s in self.states.values())
