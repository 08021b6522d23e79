import math

import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from stresspop import (
    ConstantHazard,
    ConstantStress,
    ModelParams,
    PeriodicStress,
    critical_gamma,
    extinction_at_age,
    extinction_region_area,
    solve_extinction,
    solve_extinction_from_pqg,
    solve_extinction_killed,
    solve_extinction_periodic,
    survival_condition,
    switch_probability,
)


def minimal_root_by_polynomial(p, q, gamma):
    """Independent oracle: eliminate pi1 and enumerate quartic roots.

    The type-0 equation is linear in pi1, so substituting into the
    type-1 equation leaves a univariate quartic in pi0; admissible real
    roots in [0,1]^2 are enumerated and the componentwise-smallest kept.
    """
    A = (1 - q) * p
    B = (1 - q) * (1 - p)
    f = [-A / q, 1.0 / q, -B / q]                       # pi1 as poly in pi0
    g = P.polyadd([0.0, gamma], P.polymul([1 - gamma], f))[0:4]
    eq = P.polysub(f, P.polymul(g, g))                  # f - g^2 = 0
    roots = np.roots(eq[::-1])
    candidates = []
    for r in roots:
        if abs(r.imag) > 1e-9:
            continue
        x = float(r.real)
        if not (-1e-9 <= x <= 1 + 1e-9):
            continue
        y = float(P.polyval(x, f))
        if not (-1e-9 <= y <= 1 + 1e-9):
            continue
        r0 = (1 - q) * p + (1 - q) * (1 - p) * x * x + q * y - x
        r1 = (gamma * x + (1 - gamma) * y) ** 2 - y
        if abs(r0) < 1e-8 and abs(r1) < 1e-8:
            candidates.append((x, y))
    assert candidates, "oracle found no admissible root"
    x_min = min(c[0] for c in candidates)
    y_min = min(c[1] for c in candidates)
    best = min(candidates, key=lambda c: c[0] + c[1])
    assert best[0] == pytest.approx(x_min, abs=1e-7)
    assert best[1] == pytest.approx(y_min, abs=1e-7)
    return best


class TestQuadraticSystem:
    def test_no_stress_means_sure_survival(self):
        sol = solve_extinction_from_pqg(0.0, 0.3, 0.4)
        assert sol.pi0 == 0.0 and sol.pi1 == 0.0
        assert sol.survives

    def test_lethal_stress_without_switching(self):
        # pi1 solves x = (0.3 + 0.7 x)^2; minimal root (gamma/(1-gamma))^2
        sol = solve_extinction_from_pqg(1.0, 0.0, 0.3)
        assert sol.pi0 == pytest.approx(1.0, abs=1e-12)
        assert sol.pi1 == pytest.approx((0.3 / 0.7) ** 2, abs=1e-10)

    def test_against_polynomial_oracle(self):
        p, q, gamma = 0.6, 0.4, 0.3
        oracle = minimal_root_by_polynomial(p, q, gamma)
        sol = solve_extinction_from_pqg(p, q, gamma)
        assert sol.survives
        assert sol.pi0 == pytest.approx(oracle[0], abs=1e-9)
        assert sol.pi1 == pytest.approx(oracle[1], abs=1e-9)

    def test_residual_below_contract(self, rng):
        for _ in range(20):
            p, q, g = rng.uniform(size=3)
            sol = solve_extinction_from_pqg(p, q, g)
            assert sol.converged
            assert sol.residual < 1e-12

    def test_minimality_and_fixed_points(self, rng):
        from stresspop.extinction import _iterate_minimal

        for _ in range(100):
            p, q, g = rng.uniform(size=3)

            def step(x0, x1):
                y0 = (1 - q) * p + (1 - q) * (1 - p) * x0 * x0 + q * x1
                z = g * x0 + (1 - g) * x1
                return y0, z * z

            sol = solve_extinction_from_pqg(p, q, g)
            # restart just below the root: same limit
            x0, x1, *_ = _iterate_minimal(step, start=(0.999 * sol.pi0, 0.999 * sol.pi1))
            assert x0 == pytest.approx(sol.pi0, abs=1e-9)
            assert x1 == pytest.approx(sol.pi1, abs=1e-9)
            # (1,1) is always a fixed point
            y = step(1.0, 1.0)
            assert y[0] == pytest.approx(1.0, abs=1e-14)
            assert y[1] == pytest.approx(1.0, abs=1e-14)

    def test_monotone_in_gamma_and_p(self):
        gammas = np.linspace(0.05, 0.95, 10)
        sols = [solve_extinction_from_pqg(0.55, 0.3, g) for g in gammas]
        pi0 = [s.pi0 for s in sols]
        pi1 = [s.pi1 for s in sols]
        assert all(b >= a - 1e-12 for a, b in zip(pi0, pi0[1:]))
        assert all(b >= a - 1e-12 for a, b in zip(pi1, pi1[1:]))
        interior = [(a, b) for (a, b) in zip(pi0, pi0[1:]) if 0 < a < 1 and 0 < b < 1]
        assert all(b > a for a, b in interior)

        ps = np.linspace(0.0, 1.0, 11)
        pi0_p = [solve_extinction_from_pqg(p, 0.3, 0.4).pi0 for p in ps]
        assert all(b >= a - 1e-12 for a, b in zip(pi0_p, pi0_p[1:]))

    def test_pi0_nonincreasing_in_q(self):
        qs = np.linspace(0.05, 0.9, 12)
        pi0 = [solve_extinction_from_pqg(0.7, q, 0.4).pi0 for q in qs]
        assert all(b <= a + 1e-12 for a, b in zip(pi0, pi0[1:]))

    def test_model_level_solver_uses_switch_probability(self, make_params):
        params = make_params(p=0.6, q=0.4, gamma=0.3)
        q = switch_probability(params)
        direct = solve_extinction_from_pqg(0.6, q, 0.3)
        sol = solve_extinction(params)
        assert sol.pi0 == pytest.approx(direct.pi0, abs=1e-12)

    def test_periodic_stress_rejected(self, make_params):
        params = make_params(stress=PeriodicStress(((1.0, 0.2), (1.0, 0.8))))
        with pytest.raises(ValueError):
            solve_extinction(params)


class TestAgeIndexed:
    def test_type1_is_age_independent(self, make_params):
        params = make_params(p=0.6, q=0.4, gamma=0.3)
        sol = solve_extinction(params)
        for a in (0.0, 2.0, 17.0):
            assert extinction_at_age(params, a, 1) == pytest.approx(sol.pi1, abs=1e-12)

    def test_age_zero_recovers_pi0(self, make_params):
        params = make_params(p=0.6, q=0.4, gamma=0.3)
        sol = solve_extinction(params)
        assert extinction_at_age(params, 0.0, 0) == pytest.approx(sol.pi0, abs=1e-8)

    def test_memoryless_hazard_is_age_flat(self, memoryless_params):
        params = memoryless_params(b0=1.0, alpha=0.4, gamma=0.3, p=0.6)
        sol = solve_extinction(params)
        for a in (0.5, 3.0, 12.0):
            assert extinction_at_age(params, a, 0) == pytest.approx(sol.pi0, abs=1e-8)


class TestSurvivalCondition:
    def test_half_stress_always_survives(self, rng):
        for _ in range(20):
            q, g = rng.uniform(size=2)
            assert survival_condition(0.5, q, g)

    def test_threshold_evaluation(self):
        # p = 0.75, q = 0.1: threshold = (1 + 0.1/(0.5*0.9))/2
        thr = 0.5 * (1 + 0.1 / (0.5 * 0.9))
        assert thr == pytest.approx(0.611111111111, abs=1e-9)
        assert survival_condition(0.75, 0.1, 0.5)
        assert not survival_condition(0.75, 0.1, 0.7)

    def test_threshold_above_one_always_survives(self):
        assert 0.5 * (1 + 0.4 / (0.5 * 0.6)) > 1
        for g in np.linspace(0, 1, 11):
            assert survival_condition(0.75, 0.4, g)

    def test_agrees_with_minimal_root(self, rng):
        for _ in range(100):
            p, q, g = rng.uniform(size=3)
            assert survival_condition(p, q, g) == solve_extinction_from_pqg(p, q, g).survives

    def test_critical_gamma(self):
        assert critical_gamma(0.4, 0.3) is None
        assert critical_gamma(1.0, 0.0) == pytest.approx(0.5, abs=1e-14)
        assert critical_gamma(0.75, 0.1) == pytest.approx(0.6111111111, abs=1e-9)
        assert critical_gamma(0.75, 0.4) is None


class TestExtinctionRegionArea:
    def test_maximal_stress_closed_form(self):
        assert extinction_region_area(1.0) == pytest.approx(0.5 * (1 - math.log(2)), abs=1e-12)

    def test_vanishes_at_one_half(self):
        assert extinction_region_area(0.5 + 1e-9) == pytest.approx(0.0, abs=1e-8)

    def test_against_midpoint_double_integral(self):
        # oracle: 2000^2 midpoint quadrature of the region indicator
        p = 0.75
        n = 2000
        grid = (np.arange(n) + 0.5) / n
        q, g = np.meshgrid(grid, grid, indexing="ij")
        thr = 0.5 * (1 + q / ((2 * p - 1) * (1 - q)))
        numeric = float((g > thr).mean())
        assert extinction_region_area(p) == pytest.approx(numeric, abs=1e-4)

    def test_subcritical_stress_rejected(self):
        with pytest.raises(ValueError):
            extinction_region_area(0.5)


class TestKilledProcess:
    def test_zero_kill_rate_reduces_to_plain(self, make_params):
        params = make_params(p=0.6, q=0.4, gamma=0.3)
        plain = solve_extinction(params)
        killed = solve_extinction_killed(params, 0.0)
        assert killed.omega0 == pytest.approx(0.0, abs=1e-12)
        assert killed.omega1 == pytest.approx(0.0, abs=1e-12)
        assert killed.q_tilde == pytest.approx(switch_probability(params), abs=1e-9)
        assert killed.pi0 == pytest.approx(plain.pi0, abs=1e-9)
        assert killed.pi1 == pytest.approx(plain.pi1, abs=1e-9)

    def test_constant_type1_omega_closed_form(self, memoryless_params):
        params = memoryless_params(b1=0.1)
        lam = 0.05
        killed = solve_extinction_killed(params, lam)
        assert killed.omega1 == pytest.approx(lam / (lam + 0.1), rel=1e-9)

    def test_kill_at_growth_rate_is_critical(self, memoryless_params):
        # memoryless type 1 makes the killed system exact: at the
        # Malthusian rate the killed process is critical, extinction sure
        from stresspop import malthusian_growth_rate

        params = memoryless_params(b0=1.0, b1=0.1, alpha=0.3, gamma=0.4, p=0.3)
        lam = malthusian_growth_rate(params)
        assert lam > 0
        killed = solve_extinction_killed(params, lam)
        assert killed.pi0 > 1 - 1e-4
        assert killed.pi1 > 1 - 1e-4

    def test_omega_quadratures_match_transform_identities(self, make_params):
        # integration-by-parts oracle: omega1 = 1 - xi1(lam),
        # omega0 = lam (1 - xi0(alpha+lam)) / (alpha+lam)
        params = make_params(q=0.4)
        lam = 0.07
        killed = solve_extinction_killed(params, lam)
        xi1 = params.beta1.laplace(lam)
        xi0 = params.beta0.laplace(params.alpha + lam)
        assert killed.omega1 == pytest.approx(1 - xi1, rel=1e-9)
        assert killed.omega0 == pytest.approx(
            lam * (1 - xi0) / (params.alpha + lam), rel=1e-9
        )
        assert killed.q_tilde == pytest.approx(
            params.alpha * (1 - xi0) / (params.alpha + lam), rel=1e-9
        )


class TestPeriodic:
    def test_zero_stress_gives_zero_field(self, make_params):
        params = make_params(stress=PeriodicStress(((1.0, 0.0), (1.0, 0.0))), q=0.3)
        field = solve_extinction_periodic(params, n_phase=40, a_max=2.0)
        assert field.converged
        assert np.abs(field.pi0).max() < 1e-12
        assert np.abs(field.pi1).max() < 1e-12

    def test_constant_signal_matches_age_indexed(self, make_params):
        p = 0.6
        params = make_params(stress=PeriodicStress(((1.0, p), (1.0, p))), q=0.4, gamma=0.3)
        field = solve_extinction_periodic(params, n_phase=200, a_max=4.0)
        assert field.converged
        const = make_params(p=p, q=0.4, gamma=0.3)
        # phase independence
        assert np.abs(field.pi0 - field.pi0[0]).max() < 1e-10
        assert np.abs(field.pi1 - field.pi1[0]).max() < 1e-10
        for i, a in enumerate(field.ages):
            assert field.pi0[0, i] == pytest.approx(
                extinction_at_age(const, float(a), 0), abs=1e-8
            )
        assert field.pi1[0, 0] == pytest.approx(
            extinction_at_age(const, 0.0, 1), abs=1e-8
        )

    def test_phase_dependence_direction(self, make_params):
        # long half/half cycle: entering the high-stress phase is worse
        # for a newborn vulnerable cell than entering the low-stress one
        T = 60.0
        params = make_params(
            stress=PeriodicStress(((T / 2, 0.25), (T / 2, 0.75))), q=0.3, gamma=0.4
        )
        field = solve_extinction_periodic(params, n_phase=120, a_max=1.0)
        assert field.converged
        n = field.phases.size
        pi0_low_start = field.pi0[0, 0]        # phase 0: entering low stress
        pi0_high_start = field.pi0[n // 2, 0]  # phase T/2: entering high stress
        assert pi0_low_start < pi0_high_start
