"""Independent reference implementations used as test oracles.

Everything here is deliberately written the slow, obvious way (dense matrix
exponentials, literal matrix chains, central finite differences) so that the
package's closed-form fast paths are checked against code that shares none
of their algebra.
"""

import numpy as np
from scipy.linalg import expm

from spinrelax.rates import model_m

# Basis order (-, 0, +) -> indices (0, 1, 2).


def rate_matrix(gamma_plus, gamma_minus):
    gp, gm = gamma_plus, gamma_minus
    return np.array(
        [
            [-gm, gm, 0.0],
            [gm, -(gm + gp), gp],
            [0.0, gp, -gp],
        ]
    )


def expm_propagator(tau, gamma_plus, gamma_minus):
    """Scaling-and-squaring matrix exponential of the explicit rate matrix."""
    return expm(rate_matrix(gamma_plus, gamma_minus) * tau)


def fd_model_gradient(tau, gamma_plus, gamma_minus, branch, h=1e-6):
    """Central finite differences of model_m with respect to both rates."""
    d_plus = (
        model_m(tau, (gamma_plus + h, gamma_minus), branch)
        - model_m(tau, (gamma_plus - h, gamma_minus), branch)
    ) / (2.0 * h)
    d_minus = (
        model_m(tau, (gamma_plus, gamma_minus + h), branch)
        - model_m(tau, (gamma_plus, gamma_minus - h), branch)
    ) / (2.0 * h)
    return float(d_plus), float(d_minus)


def _pulse_matrix(label, eta_plus, eta_minus):
    if label == "0":
        return np.eye(3)
    if label == "-":
        e = eta_minus
        return np.array([[e, 1.0 - e, 0.0], [1.0 - e, e, 0.0], [0.0, 0.0, 1.0]])
    if label == "+":
        e = eta_plus
        return np.array([[1.0, 0.0, 0.0], [0.0, e, 1.0 - e], [0.0, 1.0 - e, e]])
    raise ValueError(label)


def brute_expected_counts(
    prep,
    read,
    tau,
    gamma_plus,
    gamma_minus,
    f0,
    contrast,
    alpha,
    eta_plus,
    eta_minus,
    background,
    repetitions,
):
    """Literal five-factor matrix chain for the expected photon counts."""
    s = np.array([(1.0 - alpha) / 2.0, alpha, (1.0 - alpha) / 2.0])
    c = f0 * np.array([1.0 - contrast, 1.0, 1.0 - contrast])
    chain = np.dot(
        c,
        np.dot(
            _pulse_matrix(read, eta_plus, eta_minus),
            np.dot(
                expm_propagator(tau, gamma_plus, gamma_minus),
                np.dot(_pulse_matrix(prep, eta_plus, eta_minus), s),
            ),
        ),
    )
    return repetitions * (chain + background)
