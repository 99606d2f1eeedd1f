"""Piecewise-constant slope/flux schedules a(t) and their integrals A(t)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SlopeSchedule:
    """a(t) = values[i] on [breaks[i], breaks[i+1]), constant beyond the ends.

    ``breaks`` has one entry per value; ``breaks[0]`` is the start time.
    """

    breaks: tuple
    values: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        v = tuple(float(x) for x in self.values)
        if len(b) != len(v) or not b:
            raise ValueError("breaks and values must be non-empty and of equal length")
        if any(b[i + 1] <= b[i] for i in range(len(b) - 1)):
            raise ValueError(f"breaks must be strictly increasing: {b}")
        if any(not x > 0 for x in v):
            raise ValueError(f"slope values must be positive: {v}")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, a: float = 1.0, t0: float = 0.0) -> "SlopeSchedule":
        return cls((t0,), (a,))

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[float]]) -> "SlopeSchedule":
        """Build from [[t_start, a], ...]."""
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def t0(self) -> float:
        return self.breaks[0]

    @property
    def bounds(self):
        return min(self.values), max(self.values)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.asarray(self.breaks), t, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        out = np.asarray(self.values)[idx]
        return float(out) if out.ndim == 0 else out

    def integral(self, t1, t0=None):
        """A(t1) - A(t0) where A(t) = int_{breaks[0]}^t a."""
        if t0 is not None:
            return self.integral(t1) - self.integral(t0)
        t = np.asarray(t1, dtype=float)
        b = np.asarray(self.breaks + (np.inf,))
        v = np.asarray(self.values)
        # exact per-interval accumulation in a fixed order
        total = np.zeros_like(t)
        for i in range(len(v)):
            seg = np.clip(t, b[i], b[i + 1]) - b[i]
            if i == 0:
                # before the first break the first value extends backwards
                seg = np.minimum(t, b[1]) - b[0]
            total = total + v[i] * np.where(t > b[i] if i else True, seg, 0.0)
        return float(total) if total.ndim == 0 else total

    def max_on(self, t0: float, t1: float) -> float:
        vals = [self.value(t0)]
        vals += [v for b, v in zip(self.breaks, self.values) if t0 < b < t1]
        return max(vals)

    def to_pairs(self):
        return [[b, v] for b, v in zip(self.breaks, self.values)]
