"""Delay selection: sensitivity cost, Gaussian posterior approximation,
grid-search optimizers.

One iteration measures the plus branch at tau_plus and the minus branch at
tau_minus (four raw signals each).  Propagating the two measurement
uncertainties sigma_M+- through the model Jacobian

    J = [[dM+/dG+ (tau+), dM+/dG- (tau+)],
         [dM-/dG+ (tau-), dM-/dG- (tau-)]]

gives a Gaussian rate covariance, summarized by curvature coefficients

    a_plus  = (dM+/dG+)^2/s+^2 + (dM-/dG+)^2/s-^2
    a_minus = (dM+/dG-)^2/s+^2 + (dM-/dG-)^2/s-^2
    a_zero  = (dM+/dG+)(dM+/dG-)/s+^2 + (dM-/dG+)(dM-/dG-)/s-^2

with sigma_G+-^2 = a_-+/(a_+ a_- - a_0^2) and covariance -a_0/det.  The
figure of merit for a delay pair is the time-normalized combined fractional
sensitivity

    cost = sqrt((sigma_G+/G+)^2 + (sigma_G-/G-)^2) * sqrt(T),

where T is the wall-clock duration of the iteration.  When both branches
share a common sigma_M it cancels out of the argmin, leaving a sigma-free
approximate cost that can be scanned cheaply over a log delay grid; that
scan is the deterministic optimizer used between iterations.  A stochastic
particle-cloud optimizer with a variance-proxy utility is provided as an
alternative.

Delays are in ms, rates in 1/ms, durations in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rates import BRANCHES, model_gradient, model_m

__all__ = [
    "UninformativeDesign",
    "DelayPair",
    "DelayGrid",
    "TimingModel",
    "GaussianApprox",
    "BranchCurves",
    "ROBUST_CURVES",
    "gaussian_sigma",
    "cost",
    "cost_surface",
    "approx_cost_surface",
    "nob_select_delays",
    "ParticleCloud",
    "pf_select_delays",
]


class UninformativeDesign(RuntimeError):
    """Raised when a delay pair cannot constrain both rates."""


@dataclass(frozen=True)
class DelayPair:
    tau_plus: float
    tau_minus: float

    def __post_init__(self):
        if not (self.tau_plus > 0.0 and self.tau_minus > 0.0):
            raise ValueError("delays must be positive")


@dataclass(frozen=True, eq=False)
class DelayGrid:
    """Log-spaced candidate delays shared by both axes of the scan."""

    taus: np.ndarray

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        if taus.ndim != 1 or taus.size < 2:
            raise ValueError("delay grid needs at least two points")
        if np.any(taus <= 0.0) or np.any(np.diff(taus) <= 0.0):
            raise ValueError("delay grid must be positive and strictly increasing")
        object.__setattr__(self, "taus", taus)

    @classmethod
    def default(cls, size=1000):
        """Experiment regime: 3 microseconds to 5.5 ms."""
        return cls(np.geomspace(3e-3, 5.5, int(size)))

    @classmethod
    def wide(cls, size=1000):
        """Wide regime: 1 microsecond to 1 second."""
        return cls(np.geomspace(1e-3, 1e3, int(size)))

    @classmethod
    def from_bounds(cls, lo, hi, size=1000):
        return cls(np.geomspace(float(lo), float(hi), int(size)))


@dataclass(frozen=True)
class TimingModel:
    """Wall-clock duration of one iteration (eight signals, R shots each).

    The relaxation delays contribute 2 R tau per branch (two of the four
    signals wait tau, two wait 0); each of the 8 R shots additionally costs
    per_shot_time seconds of initialization and readout, and overhead_T0
    covers fixed per-iteration work.
    """

    repetitions_R: int
    overhead_T0: float = 0.0
    per_shot_time: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.repetitions_R, (int, np.integer)) and self.repetitions_R > 0):
            raise ValueError("repetitions_R must be a positive integer")
        if self.overhead_T0 < 0.0 or self.per_shot_time < 0.0:
            raise ValueError("times must be nonnegative")

    def duration_seconds(self, tau_plus, tau_minus):
        """Seconds for one iteration at the given delays (ms)."""
        delay_ms = 2.0 * self.repetitions_R * (np.asarray(tau_plus) + np.asarray(tau_minus))
        return delay_ms * 1e-3 + 8.0 * self.repetitions_R * self.per_shot_time + self.overhead_T0

    def duty_cycle(self, tau_plus, tau_minus):
        """Fraction of the iteration spent relaxing at the chosen delays."""
        total = self.duration_seconds(tau_plus, tau_minus)
        delay_s = 2.0 * self.repetitions_R * (tau_plus + tau_minus) * 1e-3
        return delay_s / total


@dataclass(frozen=True)
class GaussianApprox:
    a_plus: float
    a_minus: float
    a_zero: float
    sigma_gamma_plus: float
    sigma_gamma_minus: float
    covariance: float


@dataclass(frozen=True)
class BranchCurves:
    """Model value and gradient callables with the (tau, rates, branch) signature."""

    value: callable
    gradient: callable


ROBUST_CURVES = BranchCurves(value=model_m, gradient=model_gradient)


def _jacobian(delays, rates, curves):
    """Rows: branch measured at its delay; columns: d/dG+, d/dG-."""
    g_pp, g_pm = curves.gradient(delays.tau_plus, rates, "+")
    g_mp, g_mm = curves.gradient(delays.tau_minus, rates, "-")
    return np.array([[g_pp, g_pm], [g_mp, g_mm]], dtype=float)


def gaussian_sigma(delays, rates, sigma_m, curves=ROBUST_CURVES):
    """Gaussian rate uncertainties for one delay pair.

    sigma_m is the (sigma_M+, sigma_M-) pair of measurement uncertainties.
    Raises UninformativeDesign when the information matrix is singular.
    """
    s_plus, s_minus = sigma_m
    if not (s_plus > 0.0 and s_minus > 0.0):
        raise ValueError("sigma_m entries must be positive")
    jac = _jacobian(delays, rates, curves)
    a_plus = (jac[0, 0] / s_plus) ** 2 + (jac[1, 0] / s_minus) ** 2
    a_minus = (jac[0, 1] / s_plus) ** 2 + (jac[1, 1] / s_minus) ** 2
    a_zero = jac[0, 0] * jac[0, 1] / s_plus**2 + jac[1, 0] * jac[1, 1] / s_minus**2
    # a_plus a_minus - a_zero^2 exactly, but computed in factored form:
    # the direct difference cancels catastrophically near singular designs.
    det_j = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    det = (det_j / (s_plus * s_minus)) ** 2
    if not (np.isfinite(det) and det > 0.0):
        raise UninformativeDesign(
            f"delay pair ({delays.tau_plus}, {delays.tau_minus}) cannot "
            "constrain both rates (singular information matrix)"
        )
    return GaussianApprox(
        a_plus=float(a_plus),
        a_minus=float(a_minus),
        a_zero=float(a_zero),
        sigma_gamma_plus=float(np.sqrt(a_minus / det)),
        sigma_gamma_minus=float(np.sqrt(a_plus / det)),
        covariance=float(-a_zero / det),
    )


def jacobian_sigma(delays, rates, sigma_m, curves=ROBUST_CURVES):
    """Same covariance via the matrix route J^-1 diag(s^2) J^-T.

    Kept as an independent algebraic path; tests pin its agreement with
    gaussian_sigma to 1e-12.
    """
    jac = _jacobian(delays, rates, curves)
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if det == 0.0 or not np.isfinite(det):
        raise UninformativeDesign("singular Jacobian")
    inv = np.array([[jac[1, 1], -jac[0, 1]], [-jac[1, 0], jac[0, 0]]]) / det
    cov = inv @ np.diag([sigma_m[0] ** 2, sigma_m[1] ** 2]) @ inv.T
    return cov


def cost(delays, rates, sigma_m, timing, curves=ROBUST_CURVES):
    """Time-normalized combined fractional sensitivity of one delay pair.

    An uninformative design costs infinity.
    """
    try:
        approx = gaussian_sigma(delays, rates, sigma_m, curves)
    except UninformativeDesign:
        return float("inf")
    gp, gm = _rate_values(rates)
    fractional = (approx.sigma_gamma_plus / gp) ** 2 + (approx.sigma_gamma_minus / gm) ** 2
    t = timing.duration_seconds(delays.tau_plus, delays.tau_minus)
    return float(np.sqrt(fractional) * np.sqrt(t))


def _rate_values(rates):
    if hasattr(rates, "gamma_plus"):
        return float(rates.gamma_plus), float(rates.gamma_minus)
    gp, gm = rates
    return float(gp), float(gm)


def _gradient_tables(taus, rates, curves):
    """Per-branch gradients over a 1-D delay array."""
    g_pp, g_pm = curves.gradient(taus, rates, "+")
    g_mp, g_mm = curves.gradient(taus, rates, "-")
    return (np.asarray(g_pp), np.asarray(g_pm)), (np.asarray(g_mp), np.asarray(g_mm))


def _sigma_arrays(sigma_m, taus):
    out = []
    for entry in sigma_m:
        values = np.asarray(entry(taus) if callable(entry) else entry, dtype=float)
        values = np.broadcast_to(values, taus.shape)
        if np.any(values <= 0.0):
            raise ValueError("sigma_m entries must be positive")
        out.append(values)
    return out


def cost_surface(grid, rates, sigma_m, timing, curves=ROBUST_CURVES):
    """Full cost over the delay grid; [i, j] = (tau_plus_i, tau_minus_j).

    sigma_m entries may be scalars or callables of the delay array, so
    shot-noise uncertainties that vary with tau are supported.  Cells whose
    information matrix is singular get infinite cost.
    """
    taus = grid.taus
    (g_pp, g_pm), (g_mp, g_mm) = _gradient_tables(taus, rates, curves)
    s_plus, s_minus = _sigma_arrays(sigma_m, taus)
    # Curvature coefficients separate into a tau_plus term and a tau_minus
    # term, so the 2-D surface is built from 1-D tables by broadcasting.
    a_plus = (g_pp / s_plus)[:, None] ** 2 + (g_mp / s_minus)[None, :] ** 2
    a_minus = (g_pm / s_plus)[:, None] ** 2 + (g_mm / s_minus)[None, :] ** 2
    # Information determinant in the cancellation-free factored form
    # det J^2 / (s+^2 s-^2); see gaussian_sigma.
    det_j = g_pp[:, None] * g_mm[None, :] - g_pm[:, None] * g_mp[None, :]
    det = (det_j / (s_plus[:, None] * s_minus[None, :])) ** 2
    gp, gm = _rate_values(rates)
    t = timing.duration_seconds(taus[:, None], taus[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        fractional = (a_minus / gp**2 + a_plus / gm**2) / det
        surface = np.sqrt(fractional) * np.sqrt(t)
    surface[(det == 0.0) | ~np.isfinite(fractional)] = np.inf
    return surface


def approx_cost_surface(grid, rates, timing, curves=ROBUST_CURVES):
    """Common-sigma_M cost over the grid with the sigma factored out.

    For equal measurement uncertainties the covariance reduces to
    sigma^2 J^-1 J^-T, whose fractional trace gives

        cost / sigma = sqrt(T) / (G+ G- |det J|) *
            sqrt(G-^2 (g_pm^2 + g_mm^2) + G+^2 (g_pp^2 + g_mp^2))

    with the understanding that the plus-branch gradients are evaluated at
    tau_plus and the minus-branch ones at tau_minus.  Everything separates
    into 1-D tables, making the 2-D scan cheap.
    """
    taus = grid.taus
    (g_pp, g_pm), (g_mp, g_mm) = _gradient_tables(taus, rates, curves)
    gp, gm = _rate_values(rates)
    det = g_pp[:, None] * g_mm[None, :] - g_pm[:, None] * g_mp[None, :]
    bracket = (gm**2 * g_pm**2 + gp**2 * g_pp**2)[:, None] + (
        gm**2 * g_mm**2 + gp**2 * g_mp**2
    )[None, :]
    t = timing.duration_seconds(taus[:, None], taus[None, :])
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        surface = np.sqrt(t * bracket) / (gp * gm * np.abs(det))
    surface[det == 0.0] = np.inf
    return surface


def _argmin_pair(surface, grid):
    """First minimum in row-major order: smallest tau_plus, then tau_minus."""
    flat = np.argmin(surface)
    i, j = np.unravel_index(flat, surface.shape)
    return DelayPair(tau_plus=float(grid.taus[i]), tau_minus=float(grid.taus[j]))


def nob_select_delays(rates, timing, grid=None, curves=ROBUST_CURVES):
    """Deterministic optimizer: argmin of the sigma-free approximate cost.

    `rates` may be posterior moments (mean_plus/mean_minus), a RatePair, or
    a plain (gamma_plus, gamma_minus) tuple.
    """
    if grid is None:
        grid = DelayGrid.default()
    if hasattr(rates, "mean_plus"):
        rates = (rates.mean_plus, rates.mean_minus)
    surface = approx_cost_surface(grid, rates, timing, curves)
    return _argmin_pair(surface, grid)


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    """Weighted (gamma_plus, gamma_minus) points standing in for the posterior."""

    gammas: np.ndarray  # shape (n, 2)
    weights: np.ndarray  # shape (n,), sums to 1

    def __post_init__(self):
        gammas = np.asarray(self.gammas, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if gammas.ndim != 2 or gammas.shape[1] != 2 or gammas.shape[0] == 0:
            raise ValueError("gammas must have shape (n, 2)")
        if weights.shape != (gammas.shape[0],) or np.any(weights < 0.0):
            raise ValueError("weights must be nonnegative with shape (n,)")
        total = weights.sum()
        if not total > 0.0:
            raise ValueError("weights must not all vanish")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "weights", weights / total)

    @classmethod
    def from_grid(cls, grid, n=10**5, rng=None, jitter=True):
        """Draw n particles from a posterior grid, jittered within cells."""
        if rng is None:
            rng = np.random.default_rng()
        w = grid.weights.ravel()
        idx = rng.choice(w.size, size=int(n), p=w)
        i, j = np.unravel_index(idx, grid.weights.shape)
        gp = grid.gamma_plus_axis[i]
        gm = grid.gamma_minus_axis[j]
        if jitter:
            cell_p = float(np.mean(np.diff(grid.gamma_plus_axis)))
            cell_m = float(np.mean(np.diff(grid.gamma_minus_axis)))
            lo, hi = grid.hard_bounds
            gp = np.clip(gp + rng.uniform(-0.5, 0.5, gp.size) * cell_p, lo, hi)
            gm = np.clip(gm + rng.uniform(-0.5, 0.5, gm.size) * cell_m, lo, hi)
        gammas = np.column_stack([gp, gm])
        return cls(gammas=gammas, weights=np.full(int(n), 1.0 / int(n)))

    def is_degenerate(self):
        return bool(np.all(np.ptp(self.gammas, axis=0) == 0.0))


def pf_select_delays(cloud, timing, grid=None, curves=ROBUST_CURVES, subgrid=100):
    """Stochastic optimizer: variance-proxy utility over a delay subgrid.

    The utility of a delay pair is the cloud variance of the predicted
    measurement value per branch (how much the candidate measurement is
    expected to discriminate between posterior hypotheses), scaled by
    1/sqrt(T).  A degenerate cloud falls back to the deterministic
    optimizer at the point-mass rates.
    """
    if grid is None:
        grid = DelayGrid.default()
    mean_rates = tuple(np.average(cloud.gammas, axis=0, weights=cloud.weights))
    if cloud.is_degenerate():
        return nob_select_delays(mean_rates, timing, grid, curves)
    step = max(1, grid.taus.size // int(subgrid))
    taus = grid.taus[::step]
    gp = cloud.gammas[:, 0][:, None]
    gm = cloud.gammas[:, 1][:, None]
    w = cloud.weights[:, None]
    variances = []
    for branch in BRANCHES:
        values = curves.value(taus[None, :], (gp, gm), branch)
        mean = np.sum(w * values, axis=0)
        variances.append(np.sum(w * (values - mean) ** 2, axis=0))
    var_plus, var_minus = variances
    t = timing.duration_seconds(taus[:, None], taus[None, :])
    utility = (var_plus[:, None] + var_minus[None, :]) / np.sqrt(t)
    if not np.any(utility > 0.0):
        return nob_select_delays(mean_rates, timing, grid, curves)
    flat = np.argmax(utility)
    i, j = np.unravel_index(flat, utility.shape)
    return DelayPair(tau_plus=float(taus[i]), tau_minus=float(taus[j]))
