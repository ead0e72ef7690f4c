"""Closed-form solutions of the three-level population rate equations.

A spin-1 ground state with sublevels |-1>, |0>, |+1> thermalizes through two
bidirectional rates: gamma_plus connects |0> and |+1>, gamma_minus connects
|0> and |-1> (direct |-1> <-> |+1> relaxation is neglected).  Populations
n = (n_minus, n_zero, n_plus) evolve as dn/dt = K n with the symmetric rate
matrix

    K = [[-gm,  gm,   0 ],
         [ gm, -(gm+gp), gp],
         [ 0 ,  gp, -gp ]]        (rates in 1/ms, times in ms)

K has eigenvalues 0, -beta_fast, -beta_slow with

    beta_fast/slow = gp + gm +/- g,    g = sqrt(gp^2 + gm^2 - gp*gm),

so every population observable is a mixture of two decaying exponentials on
top of the uniform equilibrium (1/3, 1/3, 1/3).  This module evaluates the
propagator exp(K tau) and the normalized relaxation model functions in
closed form, together with their analytic derivatives with respect to both
rates.  The closed forms are what makes grid-based inference and delay
optimization cheap; a general matrix exponential is used only as a test
oracle.

Conventions used throughout the package:

* basis order is (|-1>, |0>, |+1>) mapped to indices (0, 1, 2);
* rates are in 1/ms, delays in ms, so all exponents are dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RatePair",
    "Propagator",
    "decay_constants",
    "propagator",
    "propagator_entries",
    "model_m",
    "model_m_optimal",
    "model_gradient",
]

BRANCHES = ("+", "-")


@dataclass(frozen=True)
class RatePair:
    """The pair of thermalization rates, both in 1/ms and strictly positive."""

    gamma_plus: float
    gamma_minus: float

    def __post_init__(self):
        gp, gm = self.gamma_plus, self.gamma_minus
        if not (np.isfinite(gp) and np.isfinite(gm)):
            raise ValueError("rates must be finite")
        if gp <= 0.0 or gm <= 0.0:
            raise ValueError("rates must be strictly positive (zero-rate systems are out of scope)")

    def as_tuple(self):
        return (self.gamma_plus, self.gamma_minus)

    def swapped(self):
        """Exchange the roles of the two rates."""
        return RatePair(self.gamma_minus, self.gamma_plus)


@dataclass(eq=False)
class Propagator:
    """Population transition matrix entries[i, j] = p_ij(tau) in basis (-, 0, +)."""

    entries: np.ndarray
    tau: float


def _unpack(rates):
    """Accept a RatePair or a (gamma_plus, gamma_minus) pair of arrays."""
    if isinstance(rates, RatePair):
        return rates.gamma_plus, rates.gamma_minus
    gp, gm = rates
    return np.asarray(gp), np.asarray(gm)


def _spectral_split(gp, gm):
    """Half-splitting g between the two decaying eigenvalues of K.

    Satisfies max(gp, gm)/2 <= g <= gp + gm for positive rates, so the
    plain formula is well conditioned at double precision even for gp = gm.
    Works for complex inputs (needed by complex-step differentiation), where
    np.sqrt stays on the principal branch near the positive real axis.
    """
    return np.sqrt(gp * gp + gm * gm - gp * gm)


def decay_constants(rates):
    """Return (beta_fast, beta_slow), the two nonzero decay rates of K in 1/ms."""
    gp, gm = _unpack(rates)
    g = _spectral_split(gp, gm)
    return gp + gm + g, gp + gm - g


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(tau)):
        raise ValueError("tau must be finite")
    if np.any(tau < 0.0):
        raise ValueError("tau must be nonnegative")
    return tau


def propagator_entries(tau, gp, gm):
    """Spectral closed form of exp(K tau), broadcasting over all arguments.

    Returns an array of shape broadcast(tau, gp, gm) + (3, 3).  The
    decomposition uses the eigenvectors

        u = (-gm (gm+g), (gp+g)(gm+g), -gp (gp+g))   for -beta_fast,
        w = (-(gp+g), gp-gm, gm+g)                   for -beta_slow,

    which stay nonzero for all positive rates (the textbook eigenvector
    formula degenerates at gp = gm; w above is its stable replacement,
    obtained by crossing (1,1,1) with u).  No clipping or conjugation is
    performed here so the expression remains analytic in gp and gm, which
    complex-step differentiation in other modules relies on.
    """
    tau, gp, gm = np.broadcast_arrays(np.asarray(tau), np.asarray(gp), np.asarray(gm))
    g = _spectral_split(gp, gm)
    e_fast = np.exp(-(gp + gm + g) * tau)
    e_slow = np.exp(-(gp + gm - g) * tau)

    u = np.stack([-gm * (gm + g), (gp + g) * (gm + g), -gp * (gp + g)], axis=-1)
    w = np.stack([-(gp + g), gp - gm, gm + g], axis=-1)
    # Plain (non-conjugating) squared norms keep the expression analytic.
    u_norm2 = np.sum(u * u, axis=-1)
    w_norm2 = np.sum(w * w, axis=-1)

    proj_u = u[..., :, None] * u[..., None, :] / u_norm2[..., None, None]
    proj_w = w[..., :, None] * w[..., None, :] / w_norm2[..., None, None]

    entries = (
        np.ones(tau.shape + (3, 3), dtype=proj_u.dtype) / 3.0
        + e_fast[..., None, None] * proj_u
        + e_slow[..., None, None] * proj_w
    )
    # The spectral sum reproduces the identity at tau = 0 only to roundoff;
    # the boundary value is contractual, so pin it exactly.
    if not np.iscomplexobj(entries):
        zero = np.asarray(tau == 0.0)
        if np.any(zero):
            entries[zero, :, :] = np.eye(3)
    return entries


def propagator(tau, rates):
    """Transition-probability matrix for a relaxation interval tau (ms).

    The result is symmetric, doubly stochastic, and has entries in [0, 1];
    tiny negative roundoff from the spectral sum is clipped away.
    """
    tau_arr = _check_tau(tau)
    gp, gm = _unpack(rates)
    entries = propagator_entries(tau_arr, gp, gm)
    entries = np.clip(entries, 0.0, 1.0)
    return Propagator(entries=entries, tau=tau)


def _values(tau, gp, gm, branch):
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    g = _spectral_split(gp, gm)
    own = gp if branch == "+" else gm
    e_fast = np.exp(-(gp + gm + g) * tau)
    e_slow = np.exp(-(gp + gm - g) * tau)
    value = ((g + own) * e_fast + (g - own) * e_slow) / (2.0 * g)
    # The normalization at tau = 0 is exact by construction; pin it against
    # the one-ulp roundoff of (g+own) + (g-own) vs 2g.
    return np.where(np.asarray(tau) == 0.0, 1.0, value)


def model_m(tau, rates, branch):
    """Normalized relaxation model function for one measurement branch.

    This is the expected value of the normalized difference measurement
    M_branch built from the drift-insensitive signal pair: it starts at 1 at
    tau = 0, decays to 0, and depends only on (tau, gamma_plus, gamma_minus).
    Equivalently (p00(tau) - p_b0(tau)) / (p00(0) - p_b0(0)) in propagator
    entries, with b the branch sign.

    `rates` may be a RatePair or a pair of broadcastable arrays, enabling
    vectorized evaluation over posterior grids.
    """
    tau = _check_tau(tau)
    gp, gm = _unpack(rates)
    return _values(tau, gp, gm, branch)


def model_gradient(tau, rates, branch):
    """Analytic (d/d gamma_plus, d/d gamma_minus) of model_m.

    Closed-form product-rule differentiation of the two-exponential form;
    validated against central finite differences in the test suite.
    """
    tau = _check_tau(tau)
    gp, gm = _unpack(rates)
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    g = _spectral_split(gp, gm)
    own = gp if branch == "+" else gm
    e_fast = np.exp(-(gp + gm + g) * tau)
    e_slow = np.exp(-(gp + gm - g) * tau)
    numer = (g + own) * e_fast + (g - own) * e_slow
    value = numer / (2.0 * g)

    dg_dgp = (2.0 * gp - gm) / (2.0 * g)
    dg_dgm = (2.0 * gm - gp) / (2.0 * g)

    def one_derivative(dg, d_own):
        # d/dx of the numerator, with dg = dg/dx and d_own = d(own)/dx.
        d_numer = (
            (dg + d_own) * e_fast
            - (g + own) * tau * (1.0 + dg) * e_fast
            + (dg - d_own) * e_slow
            - (g - own) * tau * (1.0 - dg) * e_slow
        )
        d_value = d_numer / (2.0 * g) - value * dg / g
        # M(0) = 1 identically, so both partials vanish there exactly.
        return np.where(np.asarray(tau) == 0.0, 0.0, d_value)

    if branch == "+":
        return one_derivative(dg_dgp, 1.0), one_derivative(dg_dgm, 0.0)
    return one_derivative(dg_dgp, 0.0), one_derivative(dg_dgm, 1.0)


def model_m_optimal(tau, rates, eta, branch):
    """Normalized expectation of the highest-sensitivity signal pair.

    Unlike model_m this depends on the pi-pulse error eta of the branch being
    measured, which is exactly why that pair is not drift-insensitive.  The
    closed form is

        exp(-(gp+gm) tau) * [cosh(g tau)
            + (own - other + eta (other - 2 own)) sinh(g tau) / ((2 eta - 1) g)]

    with own/other the branch's rate and its partner.
    """
    tau = _check_tau(tau)
    gp, gm = _unpack(rates)
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0.0) or np.any(eta >= 0.5):
        raise ValueError("eta must lie in [0, 0.5); eta = 0.5 collapses the normalization")
    g = _spectral_split(gp, gm)
    own, other = (gp, gm) if branch == "+" else (gm, gp)
    coeff = (own - other + eta * (other - 2.0 * own)) / ((2.0 * eta - 1.0) * g)
    return np.exp(-(gp + gm) * tau) * (np.cosh(g * tau) + coeff * np.sinh(g * tau))
