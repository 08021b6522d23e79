"""Bi-type age-structured branching model of bacterial stress response.

Vulnerable cells divide fast but die at division attempts with
probability p; tolerant cells divide slowly, never die, and their
daughters recover with probability gamma; vulnerable cells turn
tolerant at rate alpha. The package computes extinction probabilities,
Malthusian and Floquet growth rates with parameter sensitivities, exact
stochastic simulations, and mean-field PDE/renewal solutions, and
cross-validates the routes against each other.
"""

from .hazards import (
    ConstantHazard,
    GammaAgeHazard,
    Hazard,
    TabulatedHazard,
    hazard_from_dict,
)
from .signals import ConstantStress, PeriodicStress, StressSignal, stress_from_dict
from .model import ModelParams
from .kernels import (
    SurvivalKernel,
    birth_matrix,
    decay_matrix,
    offspring_kernel,
    survival_kernel,
    switch_probability,
    switch_probability_at_age,
    switching_rate_for_q,
)
from .extinction import (
    ExtinctionSolution,
    KilledExtinctionSolution,
    PeriodicExtinctionField,
    critical_gamma,
    extinction_at_age,
    extinction_region_area,
    solve_extinction,
    solve_extinction_from_pqg,
    solve_extinction_killed,
    solve_extinction_periodic,
    survival_condition,
)
from .spectral import (
    GrowthMatrix,
    GrowthRateBracketError,
    SpectralTriplet,
    critical_stress,
    discounted_offspring_matrix,
    malthusian_growth_rate,
    mean_offspring_matrix,
    sensitivity_alpha,
    sensitivity_gamma,
    single_type_growth_rate,
    spectral_triplet,
)

__version__ = "1.0.0"

__all__ = [name for name in dir() if not name.startswith("_")]
