"""Extinction and survival probabilities.

Under constant stress the pair (pi0, pi1) of extinction probabilities
for a population founded by one age-0 cell of each type is the minimal
root in [0,1]^2 of a quadratic system; iterating the system map from
(0, 0) converges monotonically to that root, which is how all solvers
here work (closed forms degenerate at gamma = 1).

The killed variant adds a uniform death rate to both types and links
growth-rate sensitivities to survival conditions. The periodic variant
solves the phase-and-age-indexed integral system for a periodic stress
signal on a torus grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .kernels import SurvivalKernel, survival_kernel, switch_probability
from .model import ModelParams

__all__ = [
    "ExtinctionSolution",
    "KilledExtinctionSolution",
    "PeriodicExtinctionField",
    "solve_extinction",
    "solve_extinction_from_pqg",
    "extinction_at_age",
    "survival_condition",
    "critical_gamma",
    "extinction_region_area",
    "solve_extinction_killed",
    "solve_extinction_periodic",
]

# min(pi) below 1 - SURVIVE_MARGIN counts as positive survival probability
SURVIVE_MARGIN = 1e-7
_TOL = 1e-13
_MAX_ITER = 10**6

_GL2_X, _GL2_W = np.polynomial.legendre.leggauss(2)


@dataclass(frozen=True)
class ExtinctionSolution:
    pi0: float
    pi1: float
    iterations: int
    residual: float
    converged: bool

    @property
    def survives(self) -> bool:
        """Positive survival probability from at least one founder type."""
        return min(self.pi0, self.pi1) < 1.0 - SURVIVE_MARGIN


def _iterate_minimal(step, tol=_TOL, max_iter=_MAX_ITER, start=(0.0, 0.0)):
    """Monotone fixed-point iteration from ``start``.

    The map is componentwise increasing, so starting at (0, 0) the
    iterates rise to the minimal root. The sup-norm change of one
    application equals the fixed-point residual of the previous iterate,
    so the stopping test doubles as the reported residual.
    """
    x0, x1 = start
    change = np.inf
    for n in range(1, max_iter + 1):
        y0, y1 = step(x0, x1)
        change = max(abs(y0 - x0), abs(y1 - x1))
        x0, x1 = y0, y1
        if change < tol:
            return x0, x1, n, change, True
    return x0, x1, max_iter, change, False


def solve_extinction_from_pqg(p: float, q: float, gamma: float) -> ExtinctionSolution:
    """Minimal extinction probabilities given (p, q, gamma) directly."""
    for name, v in (("p", p), ("q", q), ("gamma", gamma)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1]")

    def step(x0, x1):
        y0 = (1.0 - q) * p + (1.0 - q) * (1.0 - p) * x0 * x0 + q * x1
        z = gamma * x0 + (1.0 - gamma) * x1
        return y0, z * z

    x0, x1, n, res, ok = _iterate_minimal(step)
    return ExtinctionSolution(x0, x1, n, res, ok)


def solve_extinction(params: ModelParams) -> ExtinctionSolution:
    """Extinction probabilities under constant stress.

    Type-1 division rates drop out entirely: only (p, q, gamma) matter.
    """
    p = params.constant_p
    q = switch_probability(params)
    return solve_extinction_from_pqg(p, q, params.gamma)


def extinction_at_age(params: ModelParams, a: float, cell_type: int) -> float:
    """Extinction probability starting from one cell of age ``a``.

    Type 1 is age-independent; type 0 replaces q by the age-conditioned
    switch probability.
    """
    if cell_type not in (0, 1):
        raise ValueError("cell_type must be 0 or 1")
    sol = solve_extinction(params)
    if cell_type == 1:
        return sol.pi1
    q_a = survival_kernel(params).switch_probability_at_age(a)
    p = params.constant_p
    return (1.0 - q_a) * p + (1.0 - q_a) * (1.0 - p) * sol.pi0**2 + q_a * sol.pi1


def survival_condition(p: float, q: float, gamma: float) -> bool:
    """True iff a single age-0 cell founds a surviving population with
    positive probability: p <= 1/2 always suffices; above that the
    recovery probability must stay below a threshold that grows with q.
    """
    for name, v in (("p", p), ("q", q), ("gamma", gamma)):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1]")
    if p <= 0.5:
        return True
    if q >= 1.0:
        return True
    threshold = 0.5 * (1.0 + q / ((2.0 * p - 1.0) * (1.0 - q)))
    return gamma < threshold


def critical_gamma(p: float, q: float):
    """Recovery threshold in (0, 1) separating survival from certain
    extinction, or None when no interior threshold exists."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("p and q must lie in [0, 1]")
    if p <= 0.5 or q >= 1.0:
        return None
    threshold = 0.5 * (1.0 + q / ((2.0 * p - 1.0) * (1.0 - q)))
    if threshold >= 1.0:
        return None
    return threshold


def extinction_region_area(p: float) -> float:
    """Area of the (q, gamma) unit-square region with certain extinction.

    Closed form of the double integral of the region indicator,
    area(p) = (1 - log(2p)/(2p-1)) / 2: the threshold curve hits
    gamma = 1 at q = (2p-1)/(2p) and integrating 1 - threshold up to
    there telescopes to the expression above. Cross-checked against
    midpoint quadrature of the indicator; increasing in p, 0 at 1/2,
    (1 - log 2)/2 at p = 1.
    """
    if not (0.5 < p <= 1.0):
        raise ValueError("the extinction region is empty for p <= 1/2")
    # log1p keeps the p -> 1/2+ limit (area -> 0) free of cancellation
    return 0.5 * (1.0 - math.log1p(2.0 * p - 1.0) / (2.0 * p - 1.0))


# ---------------------------------------------------------------------------
# killed process
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KilledExtinctionSolution:
    pi0: float
    pi1: float
    iterations: int
    residual: float
    converged: bool
    kill_rate: float
    omega0: float
    omega1: float
    q_tilde: float
    p_tilde_paper: float
    p_tilde_reduced: float

    @property
    def survives(self) -> bool:
        return min(self.pi0, self.pi1) < 1.0 - SURVIVE_MARGIN


def solve_extinction_killed(params: ModelParams, kill_rate: float) -> KilledExtinctionSolution:
    """Extinction probabilities when both types additionally die at a
    uniform rate ``kill_rate``.

    omega_i is the probability that a type-i cell is removed by the
    extra death before any model event, q_tilde the probability it
    switches first. Two effective-death-probability diagnostics are
    exposed: ``p_tilde_reduced`` (denominator 1 - q_tilde) makes the
    scalar reduction of the type-0 equation exact; ``p_tilde_paper``
    divides by the plain switch probability q instead.
    """
    if kill_rate < 0:
        raise ValueError("kill_rate must be >= 0")
    p = params.constant_p
    gamma = params.gamma
    k = survival_kernel(params)
    lam = float(kill_rate)

    def psi0_killed(s):
        return math.exp(-(k.alpha + lam) * s + params.beta0.log_survival(s))

    def psi1_killed(s):
        return math.exp(-lam * s + params.beta1.log_survival(s))

    i0, _ = integrate.quad(psi0_killed, 0.0, np.inf, limit=400, epsabs=1e-13)
    i1, _ = integrate.quad(psi1_killed, 0.0, np.inf, limit=400, epsabs=1e-13)
    omega0 = lam * i0
    omega1 = lam * i1
    q_tilde = k.alpha * i0

    def step(x0, x1):
        y0 = (
            omega0
            + (1.0 - q_tilde - omega0) * p
            + (1.0 - q_tilde - omega0) * (1.0 - p) * x0 * x0
            + q_tilde * x1
        )
        z = gamma * x0 + (1.0 - gamma) * x1
        return y0, omega1 + (1.0 - omega1) * z * z

    x0, x1, n, res, ok = _iterate_minimal(step)
    q_plain = k.switch_probability()
    p_tilde_paper = p + (1.0 - p) * omega0 / (1.0 - q_plain) if q_plain < 1.0 else float("nan")
    p_tilde_reduced = p + (1.0 - p) * omega0 / (1.0 - q_tilde) if q_tilde < 1.0 else float("nan")
    return KilledExtinctionSolution(
        x0, x1, n, res, ok, lam, omega0, omega1, q_tilde, p_tilde_paper, p_tilde_reduced
    )


# ---------------------------------------------------------------------------
# periodic stress
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeriodicExtinctionField:
    """Extinction probabilities pi_i(s, a) on a (phase, age) grid.

    ``phases`` spans one period with step ``dt``; ages use the same
    step. Phase periodicity is exact by construction (phases are stored
    modulo the period).
    """

    phases: np.ndarray
    ages: np.ndarray
    pi0: np.ndarray  # shape (n_phase, n_age)
    pi1: np.ndarray
    dt: float
    iterations: int
    residual: float
    converged: bool


def _conv_row(params: ModelParams, k: SurvivalKernel, a: float, offsets: np.ndarray) -> np.ndarray:
    """switch_convolution(a, a + offsets) for an increasing offset grid.

    Accumulated relative to ``a`` so tail saturation never cancels:
    conv(a, a+t) = S1(a, a+t-part) * int_0^t exp(-alpha v
    - C0(a, a+v) + C1(a, a+v)) dv, built cell by cell with 2-point
    Gauss (composite error O(dt^4)).
    """
    offsets = np.asarray(offsets, dtype=float)
    starts = np.concatenate([[0.0], offsets[:-1]])
    mid = 0.5 * (starts + offsets)
    half = 0.5 * (offsets - starts)
    nodes = mid[:, None] + half[:, None] * _GL2_X[None, :]
    weights = half[:, None] * _GL2_W[None, :]
    u = a + nodes
    ls0_a = float(params.beta0.log_survival(a))
    ls1_a = float(params.beta1.log_survival(a))
    log_g = (
        -k.alpha * nodes
        + (params.beta0.log_survival(u) - ls0_a)
        - (params.beta1.log_survival(u) - ls1_a)
    )
    seg = (weights * np.exp(np.minimum(log_g, 690.0))).sum(axis=1)
    cum = np.cumsum(seg)
    return np.exp(params.beta1.log_survival(a + offsets) - ls1_a) * cum


def solve_extinction_periodic(
    params: ModelParams,
    n_phase: int = 200,
    a_max: float = None,
    tol: float = 1e-10,
    max_iter: int = 10**5,
) -> PeriodicExtinctionField:
    """Minimal solution of the periodic extinction system.

    The two coupled integral equations close over the age-0 boundary
    functions pi_i(s, 0): substituting the type-1 reconstruction into
    the switch term turns the type-0 equation into integrals of
    periodic boundary values against fixed kernels, so the monotone
    iteration runs on two length-``n_phase`` vectors. The full (phase,
    age) field is reconstructed afterwards.

    Quadrature uses midpoint cells of width T/n_phase; piecewise-
    constant stress with segment durations divisible by the step is
    handled exactly, and the step must resolve segment boundaries.
    """
    stress = params.stress
    if stress.period is None:
        raise ValueError("solve_extinction_periodic requires a periodic stress signal")
    T = stress.period
    gamma = params.gamma
    k = survival_kernel(params)
    dt = T / n_phase
    for d, _ in stress.segments:
        if abs(d / dt - round(d / dt)) > 1e-9 * max(1.0, d / dt):
            raise ValueError("n_phase must resolve the stress segment boundaries")
    a_tail = k.a_tail
    if a_max is None:
        a_max = a_tail

    n_t = int(math.ceil(a_tail / dt))
    n_t = ((n_t + n_phase - 1) // n_phase) * n_phase  # pad for phase folding
    t_mid = (np.arange(n_t) + 0.5) * dt
    p_phase = np.asarray(stress.p_at((np.arange(n_phase) + 0.5) * dt), dtype=float)

    log_s0 = params.beta0.log_survival(t_mid)
    log_s1 = params.beta1.log_survival(t_mid)
    k_div0 = dt * params.beta0.rate(t_mid) * np.exp(-k.alpha * t_mid + log_s0)
    k_div1 = dt * params.beta1.rate(t_mid) * np.exp(log_s1)
    k_conv = dt * k.alpha * params.beta1.rate(t_mid) * _conv_row(params, k, 0.0, t_mid)

    def fold(v):
        return v.reshape(-1, n_phase).sum(axis=0)

    f_div0, f_div1, f_conv = fold(k_div0), fold(k_div1), fold(k_conv)
    # shift[k, m] = g[(k+m) % n]; row k of g[idx] realizes the circular shift
    idx = (np.arange(n_phase)[:, None] + np.arange(n_phase)[None, :]) % n_phase

    b0 = np.zeros(n_phase)
    b1 = np.zeros(n_phase)
    residual = np.inf
    converged = False
    iterations = max_iter
    for it in range(1, max_iter + 1):
        b0h = 0.5 * (b0 + np.roll(b0, -1))  # boundary values at cell midpoints
        b1h = 0.5 * (b1 + np.roll(b1, -1))
        Gh = (gamma * b0h + (1.0 - gamma) * b1h) ** 2
        H = p_phase + (1.0 - p_phase) * b0h**2
        b0_new = H[idx] @ f_div0 + Gh[idx] @ f_conv
        b1_new = Gh[idx] @ f_div1
        residual = max(np.abs(b0_new - b0).max(), np.abs(b1_new - b1).max())
        b0, b1 = b0_new, b1_new
        if residual < tol:
            iterations = it
            converged = True
            break

    # field reconstruction
    n_a = int(math.floor(a_max / dt + 1e-9)) + 1
    ages = np.arange(n_a) * dt
    b0h = 0.5 * (b0 + np.roll(b0, -1))
    b1h = 0.5 * (b1 + np.roll(b1, -1))
    Gh = (gamma * b0h + (1.0 - gamma) * b1h) ** 2
    H = p_phase + (1.0 - p_phase) * b0h**2
    H_sh = H[idx]
    Gh_sh = Gh[idx]
    pi0 = np.empty((n_phase, n_a))
    pi1 = np.empty((n_phase, n_a))
    for i, a in enumerate(ages):
        u = a + t_mid
        ls0_a = float(params.beta0.log_survival(a))
        ls1_a = float(params.beta1.log_survival(a))
        r_div0 = dt * params.beta0.rate(u) * np.exp(
            -k.alpha * t_mid + params.beta0.log_survival(u) - ls0_a
        )
        r_div1 = dt * params.beta1.rate(u) * np.exp(params.beta1.log_survival(u) - ls1_a)
        r_conv = dt * k.alpha * params.beta1.rate(u) * _conv_row(params, k, float(a), t_mid)
        pi0[:, i] = H_sh @ fold(r_div0) + Gh_sh @ fold(r_conv)
        pi1[:, i] = Gh_sh @ fold(r_div1)

    phases = np.arange(n_phase) * dt
    return PeriodicExtinctionField(
        phases=phases,
        ages=ages,
        pi0=pi0,
        pi1=pi1,
        dt=dt,
        iterations=iterations,
        residual=float(residual),
        converged=converged,
    )
