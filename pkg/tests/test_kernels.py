import math

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import gamma as gamma_dist

from stresspop import (
    ConstantHazard,
    GammaAgeHazard,
    SurvivalKernel,
    TabulatedHazard,
    birth_matrix,
    decay_matrix,
    offspring_kernel,
    survival_kernel,
    switch_probability,
    switch_probability_at_age,
    switching_rate_for_q,
)


class TestSurvivalFunctions:
    def test_empty_interval_is_one(self, make_params):
        k = survival_kernel(make_params())
        assert k.survival0(3.0, 3.0) == pytest.approx(1.0, abs=1e-15)
        assert k.survival1(3.0, 3.0) == pytest.approx(1.0, abs=1e-15)

    def test_constant_integrand_closed_form(self):
        k = SurvivalKernel(ConstantHazard(1.0), ConstantHazard(0.1), alpha=0.5)
        assert k.survival0(0.0, 2.0) == pytest.approx(math.exp(-3.0), rel=1e-14)

    def test_gamma_survival_oracle(self):
        # oracle: Gamma(3, rate 0.1) upper tail at age 10
        k = SurvivalKernel(ConstantHazard(1.0), GammaAgeHazard(3.0, 0.1), alpha=0.0)
        expected = gamma_dist.sf(10.0, 3.0, scale=10.0)
        assert k.survival1(0.0, 10.0) == pytest.approx(expected, rel=1e-12)

    def test_reversed_interval_rejected(self, make_params):
        k = survival_kernel(make_params())
        with pytest.raises(ValueError):
            k.survival0(2.0, 1.0)

    def test_type0_survival_below_type1(self, make_params):
        # with alpha > 0 the first-event time of type 0 is strictly smaller
        k = survival_kernel(make_params(q=0.3))
        ages = np.linspace(0.1, 60.0, 50)
        s0 = np.array([k.survival0(0.0, a) for a in ages])
        s1 = np.array([k.survival1(0.0, a) for a in ages])
        assert np.all(s0 < s1)


class TestSwitchConvolution:
    def test_empty_interval(self, make_params):
        assert survival_kernel(make_params()).switch_convolution(1.0, 1.0) == 0.0

    def test_negligible_hazards_reduce_to_exponential(self):
        # with both division rates ~0 only the switch clock remains
        k = SurvivalKernel(ConstantHazard(1e-9), ConstantHazard(1e-9), alpha=1.0)
        assert k.switch_convolution(0.0, 2.0) == pytest.approx(1 - math.exp(-2.0), abs=1e-6)

    def test_two_exponential_closed_form(self):
        k = SurvivalKernel(ConstantHazard(1.0), ConstantHazard(0.1), alpha=0.5)
        t = 3.0
        expected = (math.exp(-0.1 * t) - math.exp(-1.5 * t)) / 1.4
        assert k.switch_convolution(0.0, t) == pytest.approx(expected, rel=1e-10)

    def test_grid_evaluator_matches_pointwise(self, make_params):
        k = survival_kernel(make_params(q=0.4))
        ages = np.array([0.5, 1.0, 2.5, 7.0, 20.0])
        grid_vals = k.switch_convolution_from_zero(ages)
        for a, v in zip(ages, grid_vals):
            assert v == pytest.approx(k.switch_convolution(0.0, a), rel=1e-9, abs=1e-12)


class TestSwitchProbability:
    def test_no_switching(self, make_params):
        assert switch_probability(make_params(q=0.0)) == 0.0

    def test_gamma_closed_form(self):
        # a Gamma(2, 4) division age with alpha = 4 switches first w.p. 3/4
        from stresspop import ConstantStress, ModelParams

        params = ModelParams(
            beta0=GammaAgeHazard(2.0, 4.0),
            beta1=GammaAgeHazard(2.0, 0.4),
            alpha=4.0,
            gamma=0.5,
            stress=ConstantStress(0.5),
        )
        assert switch_probability(params) == pytest.approx(0.75, abs=1e-14)

    def test_competing_exponentials(self, memoryless_params):
        params = memoryless_params(b0=2.0, alpha=0.5)
        assert switch_probability(params) == pytest.approx(0.5 / 2.5, rel=1e-12)

    def test_age_conditioned_constant_hazard_is_flat(self, memoryless_params):
        params = memoryless_params(b0=2.0, alpha=0.5)
        for a in (0.0, 1.0, 10.0):
            qa = switch_probability_at_age(params, a)
            assert qa == pytest.approx(0.2, rel=1e-9)

    def test_age_zero_matches_unconditioned(self, make_params):
        params = make_params(q=0.4)
        assert switch_probability_at_age(params, 0.0) == pytest.approx(
            switch_probability(params), rel=1e-9
        )

    def test_age_conditioned_in_unit_interval(self, make_params):
        params = make_params(q=0.6)
        for a in (0.0, 0.7, 3.0, 15.0):
            assert 0.0 <= switch_probability_at_age(params, a) <= 1.0


class TestMixedLaplace:
    def test_zeta_at_zero_equals_q(self, make_params):
        for q in (0.1, 0.4, 0.8):
            params = make_params(q=q)
            k = survival_kernel(params)
            assert k.switch_division_laplace(0.0) == pytest.approx(
                k.switch_probability(), abs=1e-9
            )

    def test_zeta_matches_nested_quadrature(self, make_params):
        # independent oracle: direct double quadrature of the pathway density
        params = make_params(q=0.4)
        k = survival_kernel(params)
        lam = 0.05

        def inner(a):
            val, _ = integrate.quad(
                lambda u: float(k.survival0(0.0, u)) * float(k.survival1(u, a)),
                0.0, a, limit=100,
            )
            return val

        def outer(a):
            return math.exp(-lam * a) * float(params.beta1.rate(a)) * inner(a)

        expected, _ = integrate.quad(outer, 0.0, 250.0, limit=300)
        expected *= params.alpha
        assert k.switch_division_laplace(lam) == pytest.approx(expected, rel=1e-7)

    def test_zeta_zero_without_switching(self, make_params):
        k = survival_kernel(make_params(q=0.0))
        assert k.switch_division_laplace(0.3) == 0.0

    def test_out_of_range_argument_rejected(self, make_params):
        k = survival_kernel(make_params(q=0.4))
        with pytest.raises(ValueError):
            k.switch_division_laplace(k.lambda_min - 0.01)


class TestSwitchingRateInversion:
    def test_zero_target(self, fig_beta0):
        assert switching_rate_for_q(fig_beta0, 0.0) == 0.0

    def test_gamma_closed_form_inverse(self):
        assert switching_rate_for_q(GammaAgeHazard(2.0, 4.0), 0.75) == pytest.approx(4.0, rel=1e-12)

    def test_constant_hazard(self):
        assert switching_rate_for_q(ConstantHazard(2.0), 0.5) == pytest.approx(2.0, rel=1e-12)

    def test_target_one_rejected(self, fig_beta0):
        with pytest.raises(ValueError):
            switching_rate_for_q(fig_beta0, 1.0)

    def test_round_trip_on_random_draws(self, rng):
        from stresspop import ConstantStress, ModelParams

        hazards = [
            GammaAgeHazard(2.5, 0.8),
            ConstantHazard(1.7),
            TabulatedHazard((0.0, 1.0, 2.0), (0.1, 0.9, 0.6)),
        ]
        for hz in hazards:
            for q_target in rng.uniform(0.05, 0.9, size=3):
                alpha = switching_rate_for_q(hz, q_target)
                params = ModelParams(
                    beta0=hz, beta1=GammaAgeHazard(3.0, 0.1),
                    alpha=alpha, gamma=0.5, stress=ConstantStress(0.5),
                )
                assert switch_probability(params) == pytest.approx(q_target, abs=1e-8)


class TestMatrices:
    def test_propagator_at_equal_ages_is_identity(self, make_params):
        k = survival_kernel(make_params())
        assert np.allclose(k.propagator(2.0, 2.0), np.eye(2))

    def test_propagator_entries_nonnegative(self, make_params):
        k = survival_kernel(make_params(q=0.5))
        P = k.propagator(1.0, 4.0)
        assert (P >= 0).all()
        assert P[1, 0] == 0.0

    def test_offspring_kernel_composition(self, make_params):
        params = make_params(p=0.3, q=0.4, gamma=0.6)
        k = survival_kernel(params)
        s, t = 0.5, 3.0
        K = offspring_kernel(params, s, t)
        P = k.propagator(s, t)
        B = birth_matrix(params, t)
        assert np.allclose(K, P @ B, rtol=1e-12)

    def test_birth_and_decay_entries(self, memoryless_params):
        params = memoryless_params(b0=1.0, b1=0.1, alpha=0.5, gamma=0.3, p=0.25)
        B = birth_matrix(params, 2.0)
        assert np.allclose(B, [[0.75, 0.0], [0.03, 0.07]])
        D = decay_matrix(params, 2.0)
        assert np.allclose(D, [[1.5, -0.5], [0.0, 0.1]])
