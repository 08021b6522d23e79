"""Model parameters: two hazards, the switching rate, the recovery
probability, and the stress signal.

Type 0 ("vulnerable") cells divide with rate ``beta0`` at their age,
switch to type 1 at rate ``alpha``, and die at a division attempt with
probability p (the stress signal at that time). Type 1 ("tolerant")
cells divide with rate ``beta1``, never die, never switch back; each
daughter of a type-1 division recovers to type 0 with probability
``gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .hazards import Hazard
from .signals import ConstantStress, StressSignal

__all__ = ["ModelParams"]


@dataclass(frozen=True)
class ModelParams:
    beta0: Hazard
    beta1: Hazard
    alpha: float
    gamma: float
    stress: StressSignal

    def __post_init__(self):
        if not (self.alpha >= 0.0 and math.isfinite(self.alpha)):
            raise ValueError("alpha must be finite and >= 0")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        self.beta0.check_assumptions()
        self.beta1.check_assumptions()

    # -- convenience -----------------------------------------------------------

    @property
    def constant_p(self) -> float:
        """The stress level, requiring a constant signal."""
        if not isinstance(self.stress, ConstantStress):
            raise ValueError("operation requires a constant stress signal")
        return self.stress.p

    @property
    def sup_rate(self) -> float:
        """Joint uniform bound on both division rates."""
        return max(self.beta0.sup_rate, self.beta1.sup_rate)

    @property
    def lower_rate(self) -> float:
        """Joint eventual lower bound on both division rates."""
        return min(self.beta0.lower_bound.rate, self.beta1.lower_bound.rate)

    def with_stress(self, stress) -> "ModelParams":
        if not isinstance(stress, StressSignal):
            stress = ConstantStress(float(stress))
        return replace(self, stress=stress)

    def with_gamma(self, gamma: float) -> "ModelParams":
        return replace(self, gamma=float(gamma))

    def with_alpha(self, alpha: float) -> "ModelParams":
        return replace(self, alpha=float(alpha))

    def check_domination(self, n_points: int = 400) -> None:
        """Verify that non-switching type-0 cells divide stochastically
        faster than type-1 cells: S0(a) < S1(a) on a verification grid.

        Only the sensitivity results rely on this; callers that need it
        invoke the check explicitly.
        """
        a_hi = 0.99
        # compare where both survivals are meaningfully away from 0 and 1
        grid = np.linspace(0.0, self._domination_horizon(), n_points + 1)[1:]
        s0 = np.exp(self.beta0.log_survival(grid))
        s1 = np.exp(self.beta1.log_survival(grid))
        mask = (s1 > 1e-12) & (s1 < a_hi + 0.01)
        if not np.all(s0[mask] < s1[mask]):
            raise ValueError("type-0 division is not stochastically faster (domination fails)")

    def _domination_horizon(self) -> float:
        return 10.0 * max(self.beta0.mean_division_time, self.beta1.mean_division_time)

    def to_dict(self) -> dict:
        return {
            "beta0": self.beta0.to_dict(),
            "beta1": self.beta1.to_dict(),
            "alpha": self.alpha,
            "gamma": self.gamma,
            "stress": self.stress.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelParams":
        from .hazards import hazard_from_dict
        from .signals import stress_from_dict

        return ModelParams(
            beta0=hazard_from_dict(d["beta0"]),
            beta1=hazard_from_dict(d["beta1"]),
            alpha=float(d["alpha"]),
            gamma=float(d["gamma"]),
            stress=stress_from_dict(d["stress"]),
        )
