"""Survival kernels, Laplace transforms, and the switch-before-division
probability: the shared numeric substrate.

For a cell of age s, ``survival0(s, t)`` is the probability that a
type-0 cell experiences no event (division attempt or switch) while
aging from s to t, and ``survival1`` the same for type-1 (division
only). ``switch_convolution(s, t)`` integrates the switch-at-u path
survive-as-0 to u, survive-as-1 from u to t; multiplied by alpha it is
the probability of switching in (s, t) and surviving to t.

Laplace transforms of the division-age densities drive every spectral
computation. The mixed transform ``switch_division_laplace`` (the
transform of the switch-then-divide pathway density) has no closed form
and is evaluated from precomputed Gauss tables:

    zeta(lam) = alpha * int e^{-lam a} beta1(a) S1(a) W(a) da,
    W(a)      = int_0^a e^{-alpha u} S0(u) / S1(u) du,

where S_i are the division-age survival functions. The cumulative
weight W is tabulated once per (beta0, beta1, alpha); each transform
evaluation is then a single vectorized quadrature, accurate to ~1e-12
and valid for lam down to just above -lower_rate.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate

from .hazards import Hazard
from .model import ModelParams

__all__ = [
    "SurvivalKernel",
    "survival_kernel",
    "switch_probability",
    "switch_probability_at_age",
    "switching_rate_for_q",
    "birth_matrix",
    "decay_matrix",
    "offspring_kernel",
]

_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)
_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)

# Tail cutoffs: survival functions below PSI_TAIL are treated as zero
# when truncating integrals over age.
PSI_TAIL = 1e-14
_TABLE_FLOOR_LOG = math.log(1e-22)


def _gauss_cells(edges: np.ndarray):
    """8-point Gauss-Legendre nodes/weights for each cell of ``edges``."""
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    nodes = mid[:, None] + half[:, None] * _GL8_X[None, :]
    weights = half[:, None] * _GL8_W[None, :]
    return nodes, weights


class SurvivalKernel:
    """Evaluator bundle over one (beta0, beta1, alpha) triple.

    Stress enters only through the birth side, so the kernel is shared
    across p values; pass p explicitly to ``birth_matrix`` and
    ``offspring_kernel``.
    """

    def __init__(self, beta0: Hazard, beta1: Hazard, alpha: float):
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        self.beta0 = beta0
        self.beta1 = beta1
        self.alpha = float(alpha)
        self._tables = None

    # -- survival functions ----------------------------------------------------

    def _check_interval(self, s, t):
        if np.any(np.asarray(t) < np.asarray(s)):
            raise ValueError("need s <= t")

    def survival0(self, s, t):
        """No division attempt and no switch while aging from s to t."""
        self._check_interval(s, t)
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.exp(-self.alpha * (t - s) - self.beta0.cumulative(s, t))
        return float(out) if out.ndim == 0 else out

    def survival1(self, s, t):
        """No division while aging from s to t as type 1."""
        self._check_interval(s, t)
        out = np.exp(-self.beta1.cumulative(s, t))
        return float(out) if np.ndim(out) == 0 else out

    def switch_convolution(self, s: float, t: float) -> float:
        """int_s^t survival0(s,u) survival1(u,t) du (adaptive quadrature)."""
        self._check_interval(s, t)
        if t == s:
            return 0.0

        def integrand(u):
            return float(self.survival0(s, u)) * float(self.survival1(u, t))

        val, _ = integrate.quad(integrand, s, t, limit=200, epsabs=1e-12, epsrel=1e-11)
        return val

    def propagator(self, s: float, t: float) -> np.ndarray:
        """2x2 no-division transfer matrix over ages [s, t].

        Row/column 0 is type 0; the off-diagonal entry carries the mass
        that switched somewhere in (s, t) and survived.
        """
        return np.array([
            [float(self.survival0(s, t)), self.alpha * self.switch_convolution(s, t)],
            [0.0, float(self.survival1(s, t))],
        ])

    # -- switch-before-division probability ---------------------------------------

    def switch_probability(self) -> float:
        """q: a newborn type-0 cell switches before its division attempt."""
        if self.alpha == 0.0:
            return 0.0
        return 1.0 - self.beta0.laplace(self.alpha)

    def switch_probability_at_age(self, a: float) -> float:
        """q_a: same, conditioned on having survived to age ``a``."""
        if a < 0:
            raise ValueError("age must be nonnegative")
        if self.alpha == 0.0:
            return 0.0
        tail = self.a_tail

        def integrand(u):
            return math.exp(-self.alpha * u - float(self.beta0.cumulative(a, a + u)))

        val, _ = integrate.quad(integrand, 0.0, tail, limit=400, epsabs=1e-12)
        return self.alpha * val

    # -- tail truncation ------------------------------------------------------------

    @property
    def a_tail(self) -> float:
        """Age beyond which both survival functions are below 1e-14."""
        return self._solve_tail(PSI_TAIL)

    def _solve_tail(self, threshold: float) -> float:
        target = math.log(threshold)

        def log_psi_max(a):
            l0 = -self.alpha * a + self.beta0.log_survival(a)
            l1 = self.beta1.log_survival(a)
            return max(l0, l1)

        hi = 1.0
        while log_psi_max(hi) > target:
            hi *= 2.0
            if hi > 1e9:
                raise RuntimeError("survival functions decay too slowly")
        lo = hi / 2.0 if hi > 1.0 else 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if log_psi_max(mid) > target:
                lo = mid
            else:
                hi = mid
        return hi

    # -- transform tables -------------------------------------------------------------

    @property
    def lambda_min(self) -> float:
        """Smallest admissible Laplace argument for the model transforms."""
        return -min(self.beta0.lower_bound.rate, self.beta1.lower_bound.rate) + 1e-6

    def _log_R(self, a):
        """log of the switch-weight integrand e^{-alpha u} S0(u)/S1(u)."""
        return (
            -self.alpha * a
            + self.beta0.log_survival(a)
            - self.beta1.log_survival(a)
        )

    def _build_tables(self):
        # find the saturation age of W(a) = int_0^a R: beyond it the
        # remaining mass is below 1e-18 of the total, so the transform
        # tail can use W = W_inf exactly
        width = min(self.beta0.mean_division_time, self.beta1.mean_division_time) / 12.0
        a_hi = 16.0 * max(self.beta0.mean_division_time, self.beta1.mean_division_time)
        w_total = None
        while True:
            probe = np.linspace(0.0, a_hi, 257)
            logR = self._log_R(probe)
            if np.any(logR > 690.0):
                raise ValueError(
                    "switch-convolution weight overflows; type-1 cells divide "
                    "far faster than type-0 in the tail"
                )
            nodes, weights = _gauss_cells(probe)
            seg = (weights * np.exp(self._log_R(nodes))).sum(axis=1)
            w_total = seg.sum()
            if seg[-64:].sum() < 1e-18 * max(w_total, 1e-300):
                break
            a_hi *= 2.0
            if a_hi > 1e8:
                raise RuntimeError("switch-convolution weight saturates too slowly")
        a_table = a_hi

        n_cells = int(np.clip(round(a_table / width), 64, 200000))
        edges = np.linspace(0.0, a_table, n_cells + 1)
        # knots of tabulated hazards must be cell edges for smoothness
        extra = [k for hz in (self.beta0, self.beta1) for k in getattr(hz, "ages", ())]
        if extra:
            edges = np.unique(np.concatenate([edges, np.asarray(extra, dtype=float)]))
            edges = edges[edges <= a_table]
        nodes, weights = _gauss_cells(edges)

        R = np.exp(self._log_R(nodes))
        cell_int = (weights * R).sum(axis=1)
        W_edges = np.concatenate([[0.0], np.cumsum(cell_int)])

        # W at the Gauss nodes themselves: prefix integrals inside each cell
        # with nested 4-point Gauss (stable, positive accumulation)
        left = edges[:-1][:, None]
        span = nodes - left
        inner = left[:, :, None] + span[:, :, None] * (0.5 * (_GL4_X + 1.0))[None, None, :]
        prefix = (np.exp(self._log_R(inner)) * (0.5 * _GL4_W)[None, None, :]).sum(axis=2) * span
        W_nodes = W_edges[:-1][:, None] + prefix

        pdf1_nodes = np.exp(
            np.log(np.maximum(self.beta1.rate(nodes), 1e-300))
            + self.beta1.log_survival(nodes)
        )
        self._tables = {
            "edges": edges,
            "nodes": nodes,
            "weights": weights,
            "W_edges": W_edges,
            "W_nodes": W_nodes,
            "W_inf": float(W_edges[-1]),
            "pdf1_weighted": weights * pdf1_nodes,
            "zeta_head": weights * pdf1_nodes * W_nodes,
        }

    @property
    def tables(self) -> dict:
        if self._tables is None:
            self._build_tables()
        return self._tables

    def switch_division_laplace(self, lam: float) -> float:
        """zeta(lam): transform of the switch-then-divide pathway density.

        Head integral from the precomputed table; beyond the table W is
        constant, so the tail is W_inf times the remaining tail of the
        type-1 division transform, supplied analytically:

            zeta = alpha [ head + W_inf (xi1(lam) - head_of_xi1) ].

        zeta(0) equals the switch probability q.
        """
        if lam < self.lambda_min:
            raise ValueError(f"Laplace argument {lam} below admissible range")
        if self.alpha == 0.0:
            return 0.0
        t = self.tables
        damp = np.exp(-lam * t["nodes"])
        head = float((t["zeta_head"] * damp).sum())
        xi1_head = float((t["pdf1_weighted"] * damp).sum())
        xi1 = self.beta1.laplace(lam)
        return self.alpha * (head + t["W_inf"] * max(xi1 - xi1_head, 0.0))

    def cumulative_switch_weight(self, ages: np.ndarray) -> np.ndarray:
        """W(a) = int_0^a e^{-alpha u} S0(u)/S1(u) du at increasing ages.

        Fresh Gauss accumulation over the consecutive intervals of
        ``ages``; no interpolation, so accuracy tracks the grid only
        through the smoothness of the integrand.
        """
        ages = np.asarray(ages, dtype=float)
        if ages.ndim != 1 or np.any(np.diff(ages) < 0) or ages[0] < 0:
            raise ValueError("ages must be a nondecreasing 1-D array of nonnegative values")
        # split wide intervals so one Gauss cell never spans more than a
        # fraction of the fastest hazard scale
        h_max = min(self.beta0.mean_division_time, self.beta1.mean_division_time) / 16.0
        starts = np.concatenate([[0.0], ages[:-1]])
        gaps = ages - starts
        n_sub = np.maximum(np.ceil(gaps / max(h_max, 1e-12)).astype(int), 1)
        seg = np.zeros(ages.size)
        for m in np.unique(n_sub):
            sel = n_sub == m
            sub_edges = starts[sel][:, None] + gaps[sel][:, None] * (
                np.arange(m + 1)[None, :] / m
            )
            lo = sub_edges[:, :-1]
            hi = sub_edges[:, 1:]
            mid = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            nodes = mid[..., None] + half[..., None] * _GL8_X
            weights = half[..., None] * _GL8_W
            logR = (
                -self.alpha * nodes
                + self.beta0.log_survival(nodes)
                - self.beta1.log_survival(nodes)
            )
            seg[sel] = (weights * np.exp(np.minimum(logR, 690.0))).sum(axis=(1, 2))
        return np.cumsum(seg)

    def switch_convolution_from_zero(self, ages: np.ndarray) -> np.ndarray:
        """switch_convolution(0, a) for an increasing grid of ages."""
        W = self.cumulative_switch_weight(ages)
        return np.exp(self.beta1.log_survival(np.asarray(ages, dtype=float))) * W


@lru_cache(maxsize=64)
def _kernel_cached(beta0: Hazard, beta1: Hazard, alpha: float) -> SurvivalKernel:
    return SurvivalKernel(beta0, beta1, alpha)


def survival_kernel(params: ModelParams) -> SurvivalKernel:
    """Shared kernel for ``params`` (cached per (beta0, beta1, alpha))."""
    return _kernel_cached(params.beta0, params.beta1, params.alpha)


def birth_matrix(params: ModelParams, a: float, p: float = None) -> np.ndarray:
    """Offspring production rate matrix B(a).

    Row i gives the rate at which one type-i cell of age ``a`` produces
    daughters of each type, per daughter, already discounted by the
    death probability p for type 0. Pass ``p`` explicitly for
    time-varying stress; it defaults to the constant stress level.
    """
    if p is None:
        p = params.constant_p
    b0 = float(params.beta0.rate(a))
    b1 = float(params.beta1.rate(a))
    g = params.gamma
    return np.array([
        [(1.0 - p) * b0, 0.0],
        [g * b1, (1.0 - g) * b1],
    ])


def decay_matrix(params: ModelParams, a: float) -> np.ndarray:
    """Loss/transfer rate matrix D(a) of the mean-field transport."""
    b0 = float(params.beta0.rate(a))
    b1 = float(params.beta1.rate(a))
    return np.array([
        [params.alpha + b0, -params.alpha],
        [0.0, b1],
    ])


def offspring_kernel(params: ModelParams, s: float, t: float, p: float = None) -> np.ndarray:
    """K(s, t): density of offspring produced at age t by a cell that
    was alive at age s, equal to propagator(s, t) @ birth_matrix(t).

    Only meaningful under constant stress unless ``p`` is supplied.
    """
    k = survival_kernel(params)
    return k.propagator(s, t) @ birth_matrix(params, t, p)


def switch_probability(params: ModelParams) -> float:
    """q: probability a newborn type-0 cell switches before dividing."""
    return survival_kernel(params).switch_probability()


def switch_probability_at_age(params: ModelParams, a: float) -> float:
    """q_a: switch-before-division probability given survival to age a."""
    return survival_kernel(params).switch_probability_at_age(a)


def switching_rate_for_q(beta0: Hazard, q_target: float, tol: float = 1e-10) -> float:
    """Invert q(alpha) for a given type-0 hazard.

    q(alpha) = 1 - xi0(alpha) is continuous and strictly increasing from
    0 toward 1, so bisection always succeeds; the Gamma family admits
    the closed form alpha = b0 ((1-q)^{-1/a0} - 1).
    """
    if not (0.0 <= q_target < 1.0):
        raise ValueError("q_target must lie in [0, 1)")
    if q_target == 0.0:
        return 0.0
    from .hazards import GammaAgeHazard, ConstantHazard

    if isinstance(beta0, GammaAgeHazard):
        return beta0.rate_param * ((1.0 - q_target) ** (-1.0 / beta0.shape) - 1.0)
    if isinstance(beta0, ConstantHazard):
        return beta0.rate_value * q_target / (1.0 - q_target)

    def q_of(alpha: float) -> float:
        return 1.0 - beta0.laplace(alpha)

    lo, hi = 0.0, 1.0
    while q_of(hi) < q_target:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("failed to bracket the switching rate")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if q_of(mid) < q_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * max(1.0, hi) and abs(q_of(0.5 * (lo + hi)) - q_target) < tol:
            break
    return 0.5 * (lo + hi)
