"""Clock abstraction: fedlets never read the wall clock directly.

All timestamps are integer Unix seconds. The simulation harness injects a
virtual clock so expiry and staleness behave deterministically under test;
the real daemon injects the wall clock.
"""

from __future__ import annotations

import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> int: ...


class WallClock:
    def now(self) -> int:
        return int(time.time())


class SimClock:
    """Virtual clock stepped by the simulation event loop."""

    def __init__(self, start: int = 0):
        self._now = start

    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> None:
        if t < self._now:
            raise ValueError(f"virtual clock cannot move backwards ({t} < {self._now})")
        self._now = t
