"""Constant-environment spectral engine.

The expected population dynamics are governed by a 2x2 family of
matrices: the mean offspring matrix (per-generation expected daughters
by type) and its Laplace-discounted version F(lam). The Malthusian
growth rate is the unique lam with spectral radius rho(F(lam)) = 1;
rho(F(.)) is continuous and strictly decreasing, so bisection is exact
and robust. The right eigenvector direction extends to the reproductive
value h(a, i), the left one to the stable age-type distribution
nu(a, i), and weighted inner products of the pair give the exact
parameter sensitivities of the growth rate.

All age-axis quadratures run over reverse-accumulated per-cell Gauss
tables in log space: tail contributions are sums of positive cell
integrals, so no cancellation occurs even where survival functions
underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hazards import ConstantHazard, GammaAgeHazard, Hazard
from .kernels import survival_kernel
from .model import ModelParams

__all__ = [
    "GrowthMatrix",
    "GrowthRateBracketError",
    "SpectralTriplet",
    "mean_offspring_matrix",
    "discounted_offspring_matrix",
    "malthusian_growth_rate",
    "single_type_growth_rate",
    "spectral_triplet",
    "sensitivity_alpha",
    "sensitivity_gamma",
    "critical_stress",
]

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)
_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)


class GrowthRateBracketError(RuntimeError):
    """The growth-rate root lies outside the admissible bracket.

    Carries the spectral radii at both bracket ends; rho_lo < 1 means
    the model is so subcritical that the root sits below the smallest
    admissible Laplace argument, which still pins the sign of the rate.
    """

    def __init__(self, msg, bracket, rho_lo, rho_hi):
        super().__init__(msg)
        self.bracket = bracket
        self.rho_lo = rho_lo
        self.rho_hi = rho_hi


@dataclass(frozen=True)
class GrowthMatrix:
    """A nonnegative 2x2 matrix with Perron data in closed form."""

    m: np.ndarray

    @property
    def spectral_radius(self) -> float:
        a, b, c, d = self.m.ravel()
        tr = a + d
        det = a * d - b * c
        disc = max(tr * tr - 4.0 * det, 0.0)
        return 0.5 * (tr + math.sqrt(disc))

    def _pick(self, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
        n1, n2 = abs(v1).sum(), abs(v2).sum()
        v = v1 if n1 >= n2 else v2
        if abs(v).sum() < 1e-14 * max(1.0, abs(self.m).max()):
            # diagonal-degenerate: Perron direction is a coordinate axis
            v = np.array([1.0, 0.0]) if self.m[0, 0] >= self.m[1, 1] else np.array([0.0, 1.0])
        if v.min() < -1e-10 * abs(v).sum():
            raise ValueError("Perron vector came out with a negative component")
        return np.maximum(v, 0.0) / abs(v).sum()

    @property
    def perron_right(self) -> np.ndarray:
        rho = self.spectral_radius
        a, b, c, d = self.m.ravel()
        return self._pick(np.array([rho - d, c]), np.array([b, rho - a]))

    @property
    def perron_left(self) -> np.ndarray:
        rho = self.spectral_radius
        a, b, c, d = self.m.ravel()
        return self._pick(np.array([c, rho - a]), np.array([rho - d, b]))


def mean_offspring_matrix(p: float, q: float, gamma: float) -> GrowthMatrix:
    """Expected daughters-by-type per generation for each mother type."""
    for name, v in (("p", p), ("q", q), ("gamma", gamma)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1]")
    m = 2.0 * np.array([
        [(1.0 - p) * (1.0 - q) + gamma * q, (1.0 - gamma) * q],
        [gamma, 1.0 - gamma],
    ])
    return GrowthMatrix(m)


def discounted_offspring_matrix(params: ModelParams, lam: float) -> GrowthMatrix:
    """F(lam): offspring counts discounted by e^{-lam * age-at-birth}.

    F(0) recovers the mean offspring matrix; rho(F(.)) is continuous
    and strictly decreasing in lam.
    """
    k = survival_kernel(params)
    p = params.constant_p
    g = params.gamma
    xi0 = params.beta0.laplace(params.alpha + lam)
    xi1 = params.beta1.laplace(lam)
    zeta = k.switch_division_laplace(lam)
    m = 2.0 * np.array([
        [(1.0 - p) * xi0 + g * zeta, (1.0 - g) * zeta],
        [g * xi1, (1.0 - g) * xi1],
    ])
    return GrowthMatrix(m)


def malthusian_growth_rate(params: ModelParams, tol: float = 1e-10) -> float:
    """The growth rate of the expected population size: the unique root
    of rho(F(lam)) = 1, by bisection on a guaranteed-monotone map.

    The root never exceeds the uniform division-rate bound; subcritical
    roots below the admissible transform range raise
    GrowthRateBracketError (whose rho_lo < 1 certifies a negative rate).
    """
    k = survival_kernel(params)
    lo = k.lambda_min
    hi = params.sup_rate
    rho_lo = discounted_offspring_matrix(params, lo).spectral_radius
    rho_hi = discounted_offspring_matrix(params, hi).spectral_radius
    if rho_lo < 1.0:
        raise GrowthRateBracketError(
            "rho(F) < 1 on the whole admissible range: growth rate below "
            f"{lo:.6g} (deeply subcritical)",
            (lo, hi), rho_lo, rho_hi,
        )
    if rho_hi > 1.0:
        # cannot happen for valid hazards (rate bounded by sup_rate); widen defensively
        while rho_hi > 1.0 and hi < 64 * params.sup_rate + 1.0:
            hi *= 2.0
            rho_hi = discounted_offspring_matrix(params, hi).spectral_radius
        if rho_hi > 1.0:
            raise GrowthRateBracketError(
                "rho(F) > 1 beyond the division-rate bound", (lo, hi), rho_lo, rho_hi
            )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if discounted_offspring_matrix(params, mid).spectral_radius > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def single_type_growth_rate(hazard: Hazard, tol: float = 1e-12) -> float:
    """Growth rate of one type alone: root of 2 * laplace(lam) = 1.

    Closed forms: rate b for a constant hazard, b (2^{1/shape} - 1) for
    the Gamma family.
    """
    if isinstance(hazard, ConstantHazard):
        return hazard.rate_value
    if isinstance(hazard, GammaAgeHazard):
        return hazard.rate_param * (2.0 ** (1.0 / hazard.shape) - 1.0)
    lo, hi = 0.0, hazard.sup_rate
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if 2.0 * hazard.laplace(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# eigentriplet
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralTriplet:
    """Growth rate with its normalized eigenpair sampled on an age grid.

    ``h`` is the reproductive value (relative contribution of an
    (age, type) cell to long-run population size), ``nu`` the stable
    age-type density; both are normalized so that nu integrates to 1
    and the nu-weighted integral of h is 1.
    """

    growth_rate: float
    ages: np.ndarray
    h: np.ndarray     # shape (n_ages, 2)
    nu: np.ndarray    # shape (n_ages, 2)
    h0: np.ndarray    # h at age 0 (2,)
    nu0: np.ndarray   # boundary weights of nu (2,)
    residual_h: float
    residual_nu: float

    @property
    def trapz_weights(self) -> np.ndarray:
        a = self.ages
        w = np.empty_like(a)
        w[1:-1] = 0.5 * (a[2:] - a[:-2])
        w[0] = 0.5 * (a[1] - a[0])
        w[-1] = 0.5 * (a[-1] - a[-2])
        return w


def _log_pdf(hazard: Hazard, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(hazard.rate(x), 1e-300)) + hazard.log_survival(x)


def spectral_triplet(params: ModelParams, n_ages: int = 2048, lam: float = None) -> SpectralTriplet:
    """Construct the normalized (rate, h, nu) triplet under constant stress.

    The age-0 directions come from exact null vectors of F(lam) - I;
    the age profiles from one reverse Gauss sweep per tail integral.
    The tail recurrence for the switch-path integral,

        T3(a_k) = local_k + T3(a_{k+1}) + dW_k * G1(a_{k+1}),

    keeps every term positive, so the profiles stay accurate out to
    ages where the survival functions underflow.
    """
    if lam is None:
        lam = malthusian_growth_rate(params)
    k = survival_kernel(params)
    p = params.constant_p
    g = params.gamma
    alpha = params.alpha

    F = discounted_offspring_matrix(params, lam)
    h0 = F.perron_right
    nu0 = F.perron_left
    residual_h = float(np.abs(F.m @ h0 - h0).sum() / np.abs(h0).sum())
    residual_nu = float(np.abs(nu0 @ F.m - nu0).sum() / np.abs(nu0).sum())

    a_grid = np.linspace(0.0, k.a_tail, n_ages)
    # integration support extends past the reported grid when lam < 0
    edges = a_grid
    if lam < 0:
        tail_hi = k.tables["edges"][-1]
        if tail_hi > a_grid[-1]:
            extra = np.linspace(a_grid[-1], tail_hi, max(int(n_ages // 4), 64) + 1)[1:]
            edges = np.concatenate([a_grid, extra])
    n_edge = edges.size

    left = edges[:-1][:, None]
    right = edges[1:][:, None]
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    nodes = mid + half * _GL8_X[None, :]
    weights = half * _GL8_W[None, :]

    lp0 = _log_pdf(params.beta0, nodes) - (alpha + lam) * nodes
    lp1 = _log_pdf(params.beta1, nodes) - lam * nodes
    g0_cell = (weights * np.exp(lp0)).sum(axis=1)
    g1_cell = (weights * np.exp(lp1)).sum(axis=1)

    logR = -alpha * nodes + params.beta0.log_survival(nodes) - params.beta1.log_survival(nodes)
    R = np.exp(np.minimum(logR, 690.0))
    dW_cell = (weights * R).sum(axis=1)

    # prefix of W inside each cell at its own Gauss nodes (nested 4-pt Gauss)
    span = nodes - left
    inner = left[:, :, None] + span[:, :, None] * (0.5 * (_GL4_X + 1.0))[None, None, :]
    logR_in = -alpha * inner + params.beta0.log_survival(inner) - params.beta1.log_survival(inner)
    W_prefix = (np.exp(np.minimum(logR_in, 690.0)) * (0.5 * _GL4_W)[None, None, :]).sum(axis=2) * span
    t3_local = (weights * np.exp(lp1) * W_prefix).sum(axis=1)

    G0rev = np.concatenate([np.cumsum(g0_cell[::-1])[::-1], [0.0]])
    G1rev = np.concatenate([np.cumsum(g1_cell[::-1])[::-1], [0.0]])
    T3rev = np.zeros(n_edge)
    for j in range(n_edge - 2, -1, -1):
        T3rev[j] = t3_local[j] + T3rev[j + 1] + dW_cell[j] * G1rev[j + 1]

    n = a_grid.size
    G0 = G0rev[:n]
    G1 = G1rev[:n]
    T3 = T3rev[:n]

    ls0 = params.beta0.log_survival(a_grid)
    ls1 = params.beta1.log_survival(a_grid)
    mix = g * h0[0] + (1.0 - g) * h0[1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        bracket0 = h0[0] * (1.0 - p) * G0 + mix * alpha * T3
        h_a0 = 2.0 * np.exp((lam + alpha) * a_grid - ls0 + np.log(np.maximum(bracket0, 1e-300)))
        h_a1 = 2.0 * np.exp(lam * a_grid - ls1 + np.log(np.maximum(mix * G1, 1e-300)))
    h_a0 = np.where(bracket0 <= 0.0, 0.0, h_a0)
    h_a1 = np.where(mix * G1 <= 0.0, 0.0, h_a1)

    W_grid = k.cumulative_switch_weight(a_grid)
    nu_a0 = np.exp(-(lam + alpha) * a_grid + ls0) * nu0[0]
    nu_a1 = np.exp(-lam * a_grid) * (
        alpha * np.exp(ls1) * W_grid * nu0[0] + np.exp(ls1) * nu0[1]
    )

    h_arr = np.column_stack([h_a0, h_a1])
    nu_arr = np.column_stack([nu_a0, nu_a1])

    w = np.empty_like(a_grid)
    w[1:-1] = 0.5 * (a_grid[2:] - a_grid[:-2])
    w[0] = 0.5 * (a_grid[1] - a_grid[0])
    w[-1] = 0.5 * (a_grid[-1] - a_grid[-2])
    total = float((w * (nu_arr[:, 0] + nu_arr[:, 1])).sum())
    nu_arr /= total
    nu0 = nu0 / total
    pairing = float((w * (nu_arr * h_arr).sum(axis=1)).sum())
    h_arr /= pairing
    h0 = h0 / pairing

    return SpectralTriplet(
        growth_rate=lam,
        ages=a_grid,
        h=h_arr,
        nu=nu_arr,
        h0=h0,
        nu0=np.asarray(nu0),
        residual_h=residual_h,
        residual_nu=residual_nu,
    )


def sensitivity_alpha(params: ModelParams, triplet: SpectralTriplet = None, n_ages: int = 2048) -> float:
    """d(growth rate)/d(switching rate): nu0-weighted average of the
    reproductive-value gap between the two types."""
    if triplet is None:
        triplet = spectral_triplet(params, n_ages=n_ages)
    w = triplet.trapz_weights
    return float((w * (triplet.h[:, 1] - triplet.h[:, 0]) * triplet.nu[:, 0]).sum())


def sensitivity_gamma(params: ModelParams, triplet: SpectralTriplet = None, n_ages: int = 2048) -> float:
    """d(growth rate)/d(recovery probability): newborn reproductive-value
    gap times the stable type-1 division flux."""
    if triplet is None:
        triplet = spectral_triplet(params, n_ages=n_ages)
    w = triplet.trapz_weights
    flux1 = float((w * params.beta1.rate(triplet.ages) * triplet.nu[:, 1]).sum())
    return 2.0 * (triplet.h0[0] - triplet.h0[1]) * flux1


def critical_stress(params: ModelParams) -> float:
    """The stress level at which the recovery-sensitivity of the growth
    rate changes sign.

    At that level the two-type growth rate equals the type-1-only rate,
    which pins it in closed form through the characteristic equation at
    that rate: p_bar = 1 - (1 - 2 zeta(lam1)) / (2 xi0(alpha + lam1)).
    The result is verified to be the dominant-branch root (rho(F) = 1)
    and respects the p_bar <= 1/2 bound that stochastic domination of
    the division times implies.
    """
    k = survival_kernel(params)
    lam1 = single_type_growth_rate(params.beta1)
    zeta = k.switch_division_laplace(lam1)
    xi0 = params.beta0.laplace(params.alpha + lam1)
    p_bar = 1.0 - (1.0 - 2.0 * zeta) / (2.0 * xi0)
    if not (-1e-8 <= p_bar <= 0.5 + 1e-8):
        raise RuntimeError(
            f"critical stress {p_bar:.6g} outside [0, 1/2]; check that type-0 "
            "cells divide stochastically faster than type-1"
        )
    p_bar = min(max(p_bar, 0.0), 1.0)
    rho = discounted_offspring_matrix(params.with_stress(p_bar), lam1).spectral_radius
    if abs(rho - 1.0) > 1e-8:
        raise RuntimeError(
            f"critical stress solves the subdominant branch (rho = {rho:.12g})"
        )
    return p_bar
