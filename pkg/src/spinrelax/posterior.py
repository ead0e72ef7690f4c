"""Grid-based Bayesian posterior over the two relaxation rates.

The posterior lives on a rectangular grid: strictly increasing axes for
gamma_plus and gamma_minus (ms^-1) and a 2-D weight array, weights[i, j]
belonging to (gamma_plus_axis[i], gamma_minus_axis[j]).  Weights are kept in
log domain internally so hundreds of sequential updates cannot underflow;
the public `weights` view is always normalized to sum 1.

Measurement likelihood: each iteration yields a measurement value and
uncertainty per branch, compared against the noiseless model curve through

    log L = -chi_plus^2 - chi_minus^2,   chi = (m - model) / (sqrt(2) sigma).

Moments treat cell weights as point masses at the grid nodes.  `regrid`
re-centers a fresh evenly spaced grid on the current mean, spanning 10
standard deviations per axis (clamped to the hard prior support), and
bilinearly interpolates the old weights onto it.

JSON snapshot layout (`format` key "posterior-grid-v1"):

    {
      "format": "posterior-grid-v1",
      "gamma_plus_axis_per_ms": [...],
      "gamma_minus_axis_per_ms": [...],
      "weights": [[...], ...],          # row i = gamma_plus_axis[i]
      "hard_bounds_per_ms": [lo, hi],
      "metadata": {...}
    }
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import logsumexp

from .rates import model_m

__all__ = [
    "DEFAULT_BOUNDS",
    "GRID_SIZE",
    "UpdateRejected",
    "MeasurementPair",
    "PosteriorMoments",
    "PosteriorGrid",
    "initial_grid",
    "log_likelihood",
    "bayes_update",
    "moments",
    "regrid",
    "to_json_dict",
    "from_json_dict",
]

DEFAULT_BOUNDS = (0.055, 100.0)
GRID_SIZE = 200


class UpdateRejected(RuntimeError):
    """Raised when a measurement is grossly inconsistent with the support."""


@dataclass(frozen=True)
class MeasurementPair:
    """One iteration's estimates for both branches, with their delays."""

    m_plus: float
    m_minus: float
    sigma_plus: float
    sigma_minus: float
    tau_plus: float
    tau_minus: float

    def __post_init__(self):
        if not (self.sigma_plus > 0.0 and self.sigma_minus > 0.0):
            raise ValueError("sigmas must be positive")
        if not (self.tau_plus > 0.0 and self.tau_minus > 0.0):
            raise ValueError("delays must be positive")

    def swapped(self):
        return MeasurementPair(
            m_plus=self.m_minus,
            m_minus=self.m_plus,
            sigma_plus=self.sigma_minus,
            sigma_minus=self.sigma_plus,
            tau_plus=self.tau_minus,
            tau_minus=self.tau_plus,
        )


class PosteriorMoments(NamedTuple):
    mean_plus: float
    mean_minus: float
    sigma_plus: float
    sigma_minus: float
    covariance: float


@dataclass(frozen=True, eq=False)
class PosteriorGrid:
    gamma_plus_axis: np.ndarray
    gamma_minus_axis: np.ndarray
    log_weights: np.ndarray
    hard_bounds: tuple = DEFAULT_BOUNDS

    def __post_init__(self):
        gp = np.asarray(self.gamma_plus_axis, dtype=float)
        gm = np.asarray(self.gamma_minus_axis, dtype=float)
        lw = np.asarray(self.log_weights, dtype=float)
        lo, hi = self.hard_bounds
        for axis in (gp, gm):
            if axis.ndim != 1 or axis.size < 2:
                raise ValueError("each axis needs at least two points")
            if np.any(np.diff(axis) <= 0.0):
                raise ValueError("axes must be strictly increasing")
            if axis[0] < lo - 1e-12 or axis[-1] > hi + 1e-12:
                raise ValueError("axis values must lie within hard_bounds")
        if lw.shape != (gp.size, gm.size):
            raise ValueError("log_weights shape must be (len(plus), len(minus))")
        if np.any(np.isnan(lw)):
            raise ValueError("log_weights must not contain NaN")
        object.__setattr__(self, "gamma_plus_axis", gp)
        object.__setattr__(self, "gamma_minus_axis", gm)
        object.__setattr__(self, "log_weights", lw - logsumexp(lw))

    @property
    def weights(self):
        """Normalized linear weights; sums to 1 within float accumulation."""
        w = np.exp(self.log_weights)
        return w / w.sum()

    @property
    def shape(self):
        return self.log_weights.shape

    def meshes(self):
        """Node coordinates broadcast to the weight shape."""
        return (
            self.gamma_plus_axis[:, None],
            self.gamma_minus_axis[None, :],
        )


def initial_grid(bounds=None, size=GRID_SIZE, prior="uniform", hard_bounds=None):
    """Fresh evenly spaced grid over `bounds` carrying the chosen prior.

    prior "uniform" is flat in rate; "log-uniform" puts weight proportional
    to 1/(gamma_plus * gamma_minus), flat in log rate.
    """
    if bounds is None:
        bounds = DEFAULT_BOUNDS
    if hard_bounds is None:
        hard_bounds = bounds
    lo, hi = bounds
    if not (0.0 < lo < hi):
        raise ValueError("bounds must satisfy 0 < lo < hi")
    axis = np.linspace(lo, hi, int(size))
    if prior == "uniform":
        lw = np.zeros((axis.size, axis.size))
    elif prior == "log-uniform":
        lw = -(np.log(axis)[:, None] + np.log(axis)[None, :])
    else:
        raise ValueError("prior must be 'uniform' or 'log-uniform'")
    return PosteriorGrid(
        gamma_plus_axis=axis,
        gamma_minus_axis=axis.copy(),
        log_weights=lw,
        hard_bounds=tuple(hard_bounds),
    )


def _chi_squared_field(pair, gamma_plus, gamma_minus, model=None):
    """Sum of squared residuals chi+^2 + chi-^2 over broadcast rate arrays.

    `model` is a branch-model callable (tau, rates, branch) -> value; None
    selects the drift-insensitive pair's closed form.
    """
    if model is None:
        model = model_m
    total = 0.0
    for branch, m, sigma, tau in (
        ("+", pair.m_plus, pair.sigma_plus, pair.tau_plus),
        ("-", pair.m_minus, pair.sigma_minus, pair.tau_minus),
    ):
        predicted = model(tau, (gamma_plus, gamma_minus), branch)
        with np.errstate(over="ignore"):
            total = total + ((m - predicted) / (np.sqrt(2.0) * sigma)) ** 2
    return total


def log_likelihood(pair, rates, model=None):
    """-chi+^2 - chi-^2 for one rate hypothesis (scalar or arrays)."""
    gp, gm = (rates.gamma_plus, rates.gamma_minus) if hasattr(rates, "gamma_plus") else rates
    value = -_chi_squared_field(
        pair, np.asarray(gp, dtype=float), np.asarray(gm, dtype=float), model
    )
    return float(value) if np.ndim(value) == 0 else value


def bayes_update(grid, pair, model=None):
    """Posterior after folding in one measurement pair.

    Multiplies the prior weights by the likelihood (addition in log domain)
    and renormalizes.  If every node's posterior log-weight is -inf the
    measurement contradicts the whole support and the update is rejected.
    `model` overrides the branch model function as in log_likelihood.
    """
    gp, gm = grid.meshes()
    lw = grid.log_weights - _chi_squared_field(pair, gp, gm, model)
    if not np.isfinite(np.max(lw)):
        raise UpdateRejected(
            "measurement is inconsistent with every point of the posterior support"
        )
    return PosteriorGrid(
        gamma_plus_axis=grid.gamma_plus_axis,
        gamma_minus_axis=grid.gamma_minus_axis,
        log_weights=lw,
        hard_bounds=grid.hard_bounds,
    )


def moments(grid):
    """Point-mass means, standard deviations, and covariance of the grid."""
    w = grid.weights
    gp, gm = grid.meshes()
    mean_p = float(np.sum(w * gp))
    mean_m = float(np.sum(w * gm))
    var_p = max(float(np.sum(w * (gp - mean_p) ** 2)), 0.0)
    var_m = max(float(np.sum(w * (gm - mean_m) ** 2)), 0.0)
    cov = float(np.sum(w * (gp - mean_p) * (gm - mean_m)))
    return PosteriorMoments(mean_p, mean_m, np.sqrt(var_p), np.sqrt(var_m), cov)


def _axis_window(mean, sigma, axis, bounds):
    """New axis span: mean +- 10 sigma, clamped, floored at 2 old cells."""
    lo_bound, hi_bound = bounds
    cell = float(np.mean(np.diff(axis)))
    lo = max(mean - 10.0 * sigma, lo_bound)
    hi = min(mean + 10.0 * sigma, hi_bound)
    min_span = 2.0 * cell
    if hi - lo < min_span:
        lo = mean - cell
        hi = mean + cell
        if lo < lo_bound:
            hi += lo_bound - lo
            lo = lo_bound
        if hi > hi_bound:
            lo -= hi - hi_bound
            hi = hi_bound
        lo = max(lo, lo_bound)
    return lo, hi


def regrid(grid, size=GRID_SIZE):
    """Evenly spaced grid re-centered on the current mean, spanning 10 sigma.

    Weights are bilinearly interpolated from the old grid, zero outside its
    support, then renormalized.
    """
    mom = moments(grid)
    new_gp = np.linspace(
        *_axis_window(mom.mean_plus, mom.sigma_plus, grid.gamma_plus_axis, grid.hard_bounds),
        int(size),
    )
    new_gm = np.linspace(
        *_axis_window(mom.mean_minus, mom.sigma_minus, grid.gamma_minus_axis, grid.hard_bounds),
        int(size),
    )
    interp = RegularGridInterpolator(
        (grid.gamma_plus_axis, grid.gamma_minus_axis),
        grid.weights,
        method="linear",
        bounds_error=False,
        fill_value=0.0,
    )
    mesh = np.stack(np.meshgrid(new_gp, new_gm, indexing="ij"), axis=-1)
    w = interp(mesh)
    total = w.sum()
    if not total > 0.0:
        raise UpdateRejected("regrid produced an empty posterior")
    with np.errstate(divide="ignore"):
        lw = np.log(w / total)
    return PosteriorGrid(
        gamma_plus_axis=new_gp,
        gamma_minus_axis=new_gm,
        log_weights=lw,
        hard_bounds=grid.hard_bounds,
    )


def to_json_dict(grid, metadata=None):
    """Snapshot in the documented posterior-grid-v1 layout."""
    return {
        "format": "posterior-grid-v1",
        "gamma_plus_axis_per_ms": grid.gamma_plus_axis.tolist(),
        "gamma_minus_axis_per_ms": grid.gamma_minus_axis.tolist(),
        "weights": grid.weights.tolist(),
        "hard_bounds_per_ms": list(grid.hard_bounds),
        "metadata": dict(metadata or {}),
    }


def from_json_dict(payload):
    if payload.get("format") != "posterior-grid-v1":
        raise ValueError("unrecognized posterior snapshot format")
    w = np.asarray(payload["weights"], dtype=float)
    if np.any(w < 0.0) or not w.sum() > 0.0:
        raise ValueError("weights must be nonnegative with positive total")
    with np.errstate(divide="ignore"):
        lw = np.log(w / w.sum())
    return PosteriorGrid(
        gamma_plus_axis=np.asarray(payload["gamma_plus_axis_per_ms"], dtype=float),
        gamma_minus_axis=np.asarray(payload["gamma_minus_axis_per_ms"], dtype=float),
        log_weights=lw,
        hard_bounds=tuple(payload["hard_bounds_per_ms"]),
    )
