"""Stress signals: the death probability p as a function of time.

Either constant, or periodic piecewise-constant (a cycle of segments,
each holding a level for a duration). Evaluation wraps time modulo the
period; segment boundaries belong to the segment they open.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["StressSignal", "ConstantStress", "PeriodicStress", "stress_from_dict"]


class StressSignal:
    def p_at(self, t):
        """Death probability at time ``t`` (scalar or array)."""
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        raise NotImplementedError

    @property
    def period(self):
        """Period T, or None for a constant signal."""
        return None

    @property
    def max_p(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantStress(StressSignal):
    p: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError("p must lie in [0, 1]")

    def p_at(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.p)
        return float(self.p) if out.ndim == 0 else out

    @property
    def is_constant(self) -> bool:
        return True

    @property
    def max_p(self) -> float:
        return self.p

    def to_dict(self) -> dict:
        return {"kind": "constant", "p": self.p}


@dataclass(frozen=True)
class PeriodicStress(StressSignal):
    """Periodic piecewise-constant signal.

    ``segments`` is a sequence of (duration, p) pairs; the period is the
    sum of durations. If ``declared_period`` is given it must match the
    sum to within 1e-12 relative.
    """

    segments: tuple
    declared_period: float = None

    def __post_init__(self):
        segs = tuple((float(d), float(p)) for d, p in self.segments)
        object.__setattr__(self, "segments", segs)
        if len(segs) < 1:
            raise ValueError("need at least one segment")
        for d, p in segs:
            if not (d > 0 and math.isfinite(d)):
                raise ValueError("segment durations must be positive")
            if not (0.0 <= p <= 1.0):
                raise ValueError("segment p must lie in [0, 1]")
        total = sum(d for d, _ in segs)
        if self.declared_period is not None:
            if abs(total - self.declared_period) > 1e-12 * max(total, self.declared_period):
                raise ValueError("segment durations do not sum to the declared period")

    @property
    def period(self) -> float:
        return sum(d for d, _ in self.segments)

    @property
    def _edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([d for d, _ in self.segments])])

    def p_at(self, t):
        t = np.asarray(t, dtype=float)
        tau = np.mod(t, self.period)
        idx = np.clip(np.searchsorted(self._edges, tau, side="right") - 1, 0, len(self.segments) - 1)
        levels = np.asarray([p for _, p in self.segments])
        out = levels[idx]
        return float(out) if out.ndim == 0 else out

    @property
    def is_constant(self) -> bool:
        levels = {p for _, p in self.segments}
        return len(levels) == 1

    @property
    def max_p(self) -> float:
        return max(p for _, p in self.segments)

    def to_dict(self) -> dict:
        return {"kind": "periodic", "segments": [[d, p] for d, p in self.segments]}


def stress_from_dict(d: dict) -> StressSignal:
    kind = d.get("kind")
    if kind == "constant":
        return ConstantStress(float(d["p"]))
    if kind == "periodic":
        return PeriodicStress(tuple((s[0], s[1]) for s in d["segments"]),
                              d.get("period"))
    raise ValueError(f"unknown stress kind: {kind!r}")
