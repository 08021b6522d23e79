"""Age-dependent division-rate (hazard) models.

Three hazard families are supported: a constant rate, a rate whose
induced division-age distribution is Gamma, and a tabulated rate with
piecewise-linear interpolation between knots and constant extrapolation
beyond the last knot.

Every hazard must satisfy three structural conditions:

  (A1) the cumulative hazard diverges, so division eventually happens;
  (A2) the rate is uniformly bounded by ``sup_rate`` (this bound is what
       makes exact thinning simulation possible);
  (A3) the rate is bounded below by ``lower_bound.rate`` from age
       ``lower_bound.age`` on, which gives exponential tails to all
       survival functions.

Violations are rejected at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.stats import gamma as _gamma

__all__ = [
    "LowerBound",
    "Hazard",
    "ConstantHazard",
    "GammaAgeHazard",
    "TabulatedHazard",
    "hazard_from_dict",
]

# Reject Laplace-transform arguments at or below -lower_bound.rate, where
# the defining integrals may diverge.
_LAPLACE_MARGIN = 1e-9


class LowerBound(NamedTuple):
    """Eventual lower bound on the rate: rate(a) >= rate for a >= age."""

    age: float
    rate: float


class Hazard:
    """Common interface for age-dependent division rates."""

    # -- primitive evaluators -------------------------------------------------

    def rate(self, a):
        """Division rate at age ``a`` (scalar or array), finite and >= 0."""
        raise NotImplementedError

    def cumulative(self, s, t):
        """Integral of the rate over ages [s, t]."""
        raise NotImplementedError

    def log_survival(self, a):
        """log P(division age > a) = -cumulative(0, a)."""
        return -self.cumulative(0.0, a)

    def survival(self, a):
        """P(division age > a)."""
        return np.exp(self.log_survival(a))

    def density(self, a):
        """Division-age probability density rate(a) * survival(a)."""
        return self.rate(a) * self.survival(a)

    # -- structural data -------------------------------------------------------

    @property
    def sup_rate(self) -> float:
        """Uniform upper bound on the rate (thinning envelope)."""
        raise NotImplementedError

    @property
    def lower_bound(self) -> LowerBound:
        raise NotImplementedError

    @property
    def mean_division_time(self) -> float:
        """Expected division age of a non-switching cell."""
        raise NotImplementedError

    def laplace(self, lam: float) -> float:
        """Laplace transform of the division-age density at ``lam``.

        Defined for lam > -lower_bound.rate; equals 1 at lam = 0 and
        decreases to 0 as lam grows.
        """
        self._check_laplace_arg(lam)
        val, _ = integrate.quad(
            lambda a: math.exp(-lam * a) * float(self.density(a)),
            0.0,
            np.inf,
            limit=400,
        )
        return val

    def _check_laplace_arg(self, lam: float) -> None:
        if lam <= -self.lower_bound.rate + _LAPLACE_MARGIN:
            raise ValueError(
                f"Laplace argument {lam} not above -{self.lower_bound.rate} "
                "(transform may diverge)"
            )

    # -- assumption checks ------------------------------------------------------

    def check_assumptions(self, n_grid: int = 2001) -> None:
        """Assert (A1)-(A3) on a dense grid; raise ValueError on failure."""
        lb = self.lower_bound
        if not (lb.rate > 0.0):
            raise ValueError("eventual lower bound on the rate must be positive (A3)")
        a_max = 50.0 / lb.rate
        if self.cumulative(0.0, a_max) <= 30.0:
            raise ValueError("cumulative hazard grows too slowly (A1)")
        ages = np.linspace(0.0, a_max, n_grid)
        rates = np.asarray(self.rate(ages), dtype=float)
        if not np.all(np.isfinite(rates)) or rates.min() < 0.0:
            raise ValueError("rate must be finite and nonnegative")
        if rates.max() > self.sup_rate * (1.0 + 1e-12) + 1e-300:
            raise ValueError("rate exceeds its declared uniform bound (A2)")
        tail = ages >= lb.age
        if np.any(rates[tail] < lb.rate * (1.0 - 1e-12)):
            raise ValueError("rate drops below its declared eventual lower bound (A3)")

    # -- serialization -----------------------------------------------------------

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantHazard(Hazard):
    """Age-independent rate; division ages are Exponential(rate)."""

    rate_value: float

    def __post_init__(self):
        if not (self.rate_value > 0.0 and math.isfinite(self.rate_value)):
            raise ValueError("constant rate must be positive and finite")

    def rate(self, a):
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("age must be nonnegative")
        return np.broadcast_to(np.float64(self.rate_value), a.shape).copy() if a.ndim else float(self.rate_value)

    def cumulative(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(t < s):
            raise ValueError("need s <= t")
        out = self.rate_value * (t - s)
        return float(out) if out.ndim == 0 else out

    @property
    def sup_rate(self) -> float:
        return self.rate_value

    @property
    def lower_bound(self) -> LowerBound:
        return LowerBound(0.0, self.rate_value)

    @property
    def mean_division_time(self) -> float:
        return 1.0 / self.rate_value

    def laplace(self, lam: float) -> float:
        self._check_laplace_arg(lam)
        return self.rate_value / (self.rate_value + lam)

    def to_dict(self) -> dict:
        return {"kind": "constant", "rate": self.rate_value}


@dataclass(frozen=True)
class GammaAgeHazard(Hazard):
    """Rate whose division age is Gamma(shape, rate) distributed.

    Shapes below 1 are rejected: their hazard blows up at age 0, which
    breaks the uniform bound (A2). For shape >= 1 the hazard increases
    from rate(0) to the plateau ``rate``, so sup_rate = rate.
    """

    shape: float
    rate_param: float

    def __post_init__(self):
        if not (self.shape >= 1.0 and math.isfinite(self.shape)):
            raise ValueError("Gamma shape must be >= 1 (unbounded hazard otherwise)")
        if not (self.rate_param > 0.0 and math.isfinite(self.rate_param)):
            raise ValueError("Gamma rate must be positive and finite")

    @property
    def _scale(self) -> float:
        return 1.0 / self.rate_param

    def rate(self, a):
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("age must be nonnegative")
        if self.shape == 1.0:
            out = np.full(a.shape, self.rate_param)
            return float(out) if out.ndim == 0 else out
        with np.errstate(divide="ignore", invalid="ignore"):
            logh = _gamma.logpdf(a, self.shape, scale=self._scale) - _gamma.logsf(
                a, self.shape, scale=self._scale
            )
            out = np.exp(logh)
        # survival underflow far in the tail: the hazard has plateaued at rate_param
        out = np.where(np.isfinite(out), out, self.rate_param)
        out = np.where(a == 0.0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def cumulative(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(t < s):
            raise ValueError("need s <= t")
        # -log of the regularized upper incomplete gamma avoids cancellation
        out = _gamma.logsf(s, self.shape, scale=self._scale) - _gamma.logsf(
            t, self.shape, scale=self._scale
        )
        return float(out) if out.ndim == 0 else out

    def log_survival(self, a):
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("age must be nonnegative")
        out = _gamma.logsf(a, self.shape, scale=self._scale)
        return float(out) if out.ndim == 0 else out

    def density(self, a):
        a = np.asarray(a, dtype=float)
        out = _gamma.pdf(a, self.shape, scale=self._scale)
        return float(out) if out.ndim == 0 else out

    @property
    def sup_rate(self) -> float:
        return self.rate_param

    @cached_property
    def lower_bound(self) -> LowerBound:
        if self.shape == 1.0:
            return LowerBound(0.0, self.rate_param)
        # age at which the increasing hazard reaches half its plateau
        target = 0.5 * self.rate_param
        lo, hi = 0.0, 1.0
        while self.rate(hi) < target:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if self.rate(mid) < target:
                lo = mid
            else:
                hi = mid
        return LowerBound(hi, target)

    @property
    def mean_division_time(self) -> float:
        return self.shape / self.rate_param

    def laplace(self, lam: float) -> float:
        self._check_laplace_arg(lam)
        return (1.0 + lam / self.rate_param) ** (-self.shape)

    def to_dict(self) -> dict:
        return {"kind": "gamma", "shape": self.shape, "rate": self.rate_param}


@dataclass(frozen=True)
class TabulatedHazard(Hazard):
    """Rate given at increasing knot ages, linearly interpolated between
    knots, constant before the first knot and after the last one.

    The extrapolated (last) rate must be positive so the cumulative
    hazard diverges (A1).
    """

    ages: tuple
    rates: tuple

    def __post_init__(self):
        ages = tuple(float(a) for a in self.ages)
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "rates", rates)
        if len(ages) != len(rates) or len(ages) < 1:
            raise ValueError("ages and rates must be equal-length, nonempty")
        if ages[0] < 0 or any(b <= a for a, b in zip(ages, ages[1:])):
            raise ValueError("knot ages must be nonnegative and strictly increasing")
        if any(r < 0 or not math.isfinite(r) for r in rates):
            raise ValueError("rates must be finite and nonnegative")
        if rates[-1] <= 0:
            raise ValueError("extrapolated rate must be positive (A1)")

    def rate(self, a):
        a = np.asarray(a, dtype=float)
        if np.any(a < 0):
            raise ValueError("age must be nonnegative")
        out = np.interp(a, self.ages, self.rates)
        return float(out) if out.ndim == 0 else out

    @cached_property
    def _knot_cumulative(self) -> np.ndarray:
        ages = np.asarray(self.ages)
        rates = np.asarray(self.rates)
        seg = 0.5 * (rates[1:] + rates[:-1]) * np.diff(ages)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def _cumulative_from_first_knot(self, x):
        """Exact integral of the rate over [ages[0], x] for x >= 0 (piecewise quadratic)."""
        ages = np.asarray(self.ages)
        rates = np.asarray(self.rates)
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(ages, x, side="right") - 1, 0, len(ages) - 1)
        base = self._knot_cumulative[idx]
        a0 = ages[idx]
        r0 = rates[idx]
        r_at_x = np.interp(x, ages, rates)
        partial = 0.5 * (r0 + r_at_x) * (x - a0)
        below = x < ages[0]
        out = np.where(below, self.rates[0] * (x - ages[0]), base + partial)
        return out

    def cumulative(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(t < s):
            raise ValueError("need s <= t")
        out = self._cumulative_from_first_knot(t) - self._cumulative_from_first_knot(s)
        return float(out) if out.ndim == 0 else out

    @property
    def sup_rate(self) -> float:
        return max(self.rates)

    @property
    def lower_bound(self) -> LowerBound:
        return LowerBound(self.ages[-1], self.rates[-1])

    @cached_property
    def mean_division_time(self) -> float:
        a_last = self.ages[-1]
        head, _ = integrate.quad(
            lambda a: float(self.survival(a)), 0.0, a_last,
            points=list(self.ages), limit=400,
        )
        # constant rate beyond the last knot: exponential tail in closed form
        tail = float(self.survival(a_last)) / self.rates[-1]
        return head + tail

    def laplace(self, lam: float) -> float:
        self._check_laplace_arg(lam)
        a_last = self.ages[-1]
        head, _ = integrate.quad(
            lambda a: math.exp(-lam * a) * float(self.density(a)),
            0.0,
            a_last,
            points=list(self.ages),
            limit=400,
        )
        r = self.rates[-1]
        tail = (
            math.exp(-lam * a_last) * float(self.survival(a_last)) * r / (r + lam)
        )
        return head + tail

    def to_dict(self) -> dict:
        return {"kind": "tabulated", "ages": list(self.ages), "rates": list(self.rates)}


def hazard_from_dict(d: dict) -> Hazard:
    """Build a hazard from its config-file form."""
    kind = d.get("kind")
    if kind == "constant":
        return ConstantHazard(float(d["rate"]))
    if kind == "gamma":
        return GammaAgeHazard(float(d["shape"]), float(d["rate"]))
    if kind == "tabulated":
        return TabulatedHazard(tuple(d["ages"]), tuple(d["rates"]))
    raise ValueError(f"unknown hazard kind: {kind!r}")
