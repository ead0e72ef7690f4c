"""Photon-count measurement model and Poisson signal simulator.

A single pulsed signal S_ij is: optically pump toward |0>, apply a microwave
pi pulse i (or none), relax for tau, apply pi pulse j, read out fluorescence.
Its expected photon sum over R repetitions is the five-factor chain

    S_ij(tau) = R * (c . B[j] . P(tau) . B[i] . s  +  b(tau))

with s the pumped populations, B the (imperfect) pulse operators, P(tau) the
relaxation propagator, c the state-dependent photon yields, and b(tau) an
optional background.  A measurement takes the difference of two such signals
at tau and again at tau = 0, and normalizes; every parameter except the
pi-pulse errors cancels from that ratio for suitably chosen signal pairs,
which is the whole point of the drift-insensitive protocol.

The simulator draws Poisson counts around the expected values.  With static
parameters all repetitions collapse into a single draw (sums of independent
Poissons are Poisson); under a drift schedule the four signals are drawn
interleaved in blocks of repetitions, mirroring how the pulse sequencer
interleaves them in hardware, which is what makes slow drift cancel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .rates import RatePair, model_m, propagator

__all__ = [
    "STATES",
    "STATE_INDEX",
    "SignalParams",
    "SignalSample",
    "FourSignals",
    "Measurement",
    "ProtocolSpec",
    "ROBUST_PROTOCOL",
    "OPTIMAL_PROTOCOL",
    "pulse_matrix",
    "prep_vector",
    "collection_vector",
    "expected_counts",
    "expected_difference",
    "sample_signals",
    "drift_schedule",
]

# Basis order (-, 0, +) -> indices (0, 1, 2); pulse labels use the same chars.
STATES = ("-", "0", "+")
STATE_INDEX = {"-": 0, "0": 1, "+": 2}

_DRIFTABLE = ("f0", "contrast_C", "alpha", "eta_plus", "eta_minus", "background")


@dataclass(frozen=True)
class SignalParams:
    """Static acquisition parameters of the photon-counting measurement.

    f0: expected photons per readout of |0>; contrast_C: fractional
    fluorescence dip of |+-1> relative to |0>; alpha: optical pump fidelity
    into |0>; eta_plus/eta_minus: pi-pulse failure probabilities; background:
    photons per readout added to every signal, either a constant or a
    callable of tau (ms); repetitions_R: pulse-sequence repetitions summed
    into one recorded count.
    """

    f0: float = 0.02
    contrast_C: float = 0.24
    alpha: float = 0.8
    eta_plus: float = 0.05
    eta_minus: float = 0.05
    background: object = 0.0
    repetitions_R: int = 10**6

    def __post_init__(self):
        if not (self.f0 > 0.0 and np.isfinite(self.f0)):
            raise ValueError("f0 must be positive")
        if not (0.0 <= self.contrast_C < 1.0):
            raise ValueError("contrast_C must lie in [0, 1)")
        if not (1.0 / 3.0 < self.alpha <= 1.0):
            # At alpha = 1/3 the pumped state is fully mixed and every
            # difference signal vanishes identically.
            raise ValueError("alpha must lie in (1/3, 1]")
        for name in ("eta_plus", "eta_minus"):
            eta = getattr(self, name)
            if not (0.0 <= eta < 0.5):
                raise ValueError(f"{name} must lie in [0, 0.5)")
        if not callable(self.background) and not (
            np.isfinite(self.background) and self.background >= 0.0
        ):
            raise ValueError("background must be nonnegative or a callable of tau")
        if not (int(self.repetitions_R) == self.repetitions_R and self.repetitions_R >= 1):
            raise ValueError("repetitions_R must be a positive integer")

    def background_at(self, tau):
        return self.background(tau) if callable(self.background) else self.background


def pulse_matrix(label, params):
    """Population transfer matrix of pi pulse `label` ('0' means no pulse)."""
    if label == "0":
        return np.eye(3)
    if label == "+":
        e = params.eta_plus
        return np.array([[1.0, 0.0, 0.0], [0.0, e, 1.0 - e], [0.0, 1.0 - e, e]])
    if label == "-":
        e = params.eta_minus
        return np.array([[e, 1.0 - e, 0.0], [1.0 - e, e, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"unknown state label {label!r}")


def prep_vector(params):
    """Populations after optical pumping: alpha in |0>, remainder split evenly."""
    half = (1.0 - params.alpha) / 2.0
    return np.array([half, params.alpha, half])


def collection_vector(params):
    """Expected photons per readout conditioned on the pre-readout state."""
    dim = params.f0 * (1.0 - params.contrast_C)
    return np.array([dim, params.f0, dim])


@dataclass(frozen=True)
class SignalSample:
    """One recorded signal: a photon sum over R repetitions and its mean."""

    counts: int
    expectation: float
    tau: float
    prep: str
    read: str

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError("counts must be nonnegative")


@dataclass(frozen=True)
class Measurement:
    """A signal pair (first, second), each a (prep, read) label tuple.

    The normalized measurement is (first - second)(tau) / (first - second)(0);
    it only carries information when exactly one of the two signals re-reads
    the pumped |0> population at tau = 0 (readout pulse undoing the
    preparation pulse), which is also what keeps the tau = 0 denominator
    nonzero over the whole valid parameter domain.
    """

    first: tuple
    second: tuple

    def __post_init__(self):
        for prep, read in (self.first, self.second):
            if prep not in STATES or read not in STATES:
                raise ValueError(f"unknown state label in signal ({prep}, {read})")
        if self.first == self.second:
            raise ValueError("measurement needs two distinct signals")
        bright_count = (self.first[0] == self.first[1]) + (self.second[0] == self.second[1])
        if bright_count != 1:
            raise ValueError(
                "measurement must pair one self-reverting signal with one "
                "population-transfer signal (otherwise the tau = 0 reference "
                "difference vanishes)"
            )

    @property
    def label(self):
        return f"({self.first[0]}{self.first[1]},{self.second[0]}{self.second[1]})"

    def oriented(self, params):
        """Order the pair so the expected tau = 0 difference is positive."""
        anchor = RatePair(1.0, 1.0)  # tau = 0 expectations do not involve rates
        first = expected_counts(self.first[0], self.first[1], 0.0, anchor, params)
        second = expected_counts(self.second[0], self.second[1], 0.0, anchor, params)
        if first >= second:
            return self
        return Measurement(self.second, self.first)


@dataclass(frozen=True)
class ProtocolSpec:
    """The two measurements (one per relaxation branch) of a full protocol."""

    plus: Measurement
    minus: Measurement

    @property
    def label(self):
        return f"{self.plus.label},{self.minus.label}"

    def branch(self, branch):
        if branch == "+":
            return self.plus
        if branch == "-":
            return self.minus
        raise ValueError(f"branch must be '+' or '-', got {branch!r}")


ROBUST_PROTOCOL = ProtocolSpec(
    plus=Measurement(("+", "0"), ("0", "0")),
    minus=Measurement(("-", "0"), ("0", "0")),
)

OPTIMAL_PROTOCOL = ProtocolSpec(
    plus=Measurement(("+", "0"), ("+", "+")),
    minus=Measurement(("-", "0"), ("-", "-")),
)

_ROBUST_MEASUREMENTS = {
    frozenset({("+", "0"), ("0", "0")}): "+",
    frozenset({("0", "+"), ("0", "0")}): "+",
    frozenset({("-", "0"), ("0", "0")}): "-",
    frozenset({("0", "-"), ("0", "0")}): "-",
}


def expected_counts(prep, read, tau, rates, params):
    """Expected photon sum of signal S_{prep,read}(tau); vectorized over tau."""
    entries = propagator(tau, rates).entries
    start = pulse_matrix(prep, params) @ prep_vector(params)
    finish = collection_vector(params) @ pulse_matrix(read, params)
    bare = np.einsum("...ij,j->...i", entries, start) @ finish
    return params.repetitions_R * (bare + params.background_at(tau))


def expected_difference(measurement, tau, rates, params):
    """Expected (first - second) signal difference; backgrounds cancel.

    For the drift-insensitive pairs this takes the closed form
    R * C * f0 * (3 alpha - 1)/2 * (1 - eta_b) * model_m(tau); the generic
    two-evaluation path is used for everything else, and the two agree.
    """
    branch = _ROBUST_MEASUREMENTS.get(frozenset({measurement.first, measurement.second}))
    if branch is not None:
        eta = params.eta_plus if branch == "+" else params.eta_minus
        scale = (
            params.repetitions_R
            * params.contrast_C
            * params.f0
            * (3.0 * params.alpha - 1.0)
            / 2.0
            * (1.0 - eta)
        )
        value = scale * model_m(tau, rates, branch)
        # The closed form is for (self-reverting minus transfer); flip if the
        # caller stored the pair the other way around.
        if measurement.first[0] != measurement.first[1]:
            value = -value
        return value
    first = expected_counts(measurement.first[0], measurement.first[1], tau, rates, params)
    second = expected_counts(measurement.second[0], measurement.second[1], tau, rates, params)
    return first - second


def drift_schedule(params, t, drifts):
    """Instantaneous SignalParams at wall-clock time t (seconds).

    `drifts` maps field names (f0, contrast_C, alpha, eta_plus, eta_minus,
    background) to callables of t returning the drifted value; missing fields
    stay constant.  Values violating the parameter invariants raise, same as
    direct construction.
    """
    if not drifts:
        return params
    unknown = set(drifts) - set(_DRIFTABLE)
    if unknown:
        raise ValueError(f"cannot drift unknown fields: {sorted(unknown)}")
    return replace(params, **{name: fn(t) for name, fn in drifts.items()})


@dataclass(frozen=True)
class FourSignals:
    """The four raw signals of one measurement: pair at tau, pair at tau = 0."""

    first_tau: SignalSample
    second_tau: SignalSample
    first_zero: SignalSample
    second_zero: SignalSample

    def as_tuple(self):
        return (self.first_tau, self.second_tau, self.first_zero, self.second_zero)


def _signal_means(measurement, tau, rates, params):
    (p1, r1), (p2, r2) = measurement.first, measurement.second
    return (
        expected_counts(p1, r1, tau, rates, params),
        expected_counts(p2, r2, tau, rates, params),
        expected_counts(p1, r1, 0.0, rates, params),
        expected_counts(p2, r2, 0.0, rates, params),
    )


def sample_signals(
    measurement,
    tau,
    rates,
    params,
    rng,
    drifts=None,
    t_start=0.0,
    duration_s=0.0,
    block_reps=1000,
):
    """Draw the four Poisson signals of one measurement.

    Static parameters use a single draw per signal at the full-R expectation.
    With a drift schedule the acquisition is split into interleaved blocks of
    `block_reps` repetitions, spread evenly over [t_start, t_start +
    duration_s]; all four signals within a block share the same instantaneous
    parameters, which is the interleaving that cancels slow drift.
    """
    total_r = params.repetitions_R
    if drifts is None:
        means = _signal_means(measurement, tau, rates, params)
        if any(mean < 0.0 for mean in means):
            raise ValueError("negative expected counts (check the background function)")
        counts = [int(rng.poisson(mean)) for mean in means]
        expectations = list(means)
    else:
        n_blocks = math.ceil(total_r / block_reps)
        counts = [0, 0, 0, 0]
        expectations = [0.0, 0.0, 0.0, 0.0]
        done = 0
        for b in range(n_blocks):
            reps = min(block_reps, total_r - done)
            done += reps
            t_block = t_start + (b + 0.5) / n_blocks * duration_s
            params_b = replace(drift_schedule(params, t_block, drifts), repetitions_R=reps)
            means = _signal_means(measurement, tau, rates, params_b)
            for k, mean in enumerate(means):
                if mean < 0.0:
                    raise ValueError("negative expected counts under drift")
                counts[k] += int(rng.poisson(mean))
                expectations[k] += mean

    (p1, r1), (p2, r2) = measurement.first, measurement.second
    labels = [(p1, r1), (p2, r2), (p1, r1), (p2, r2)]
    taus = [tau, tau, 0.0, 0.0]
    samples = [
        SignalSample(counts=c, expectation=float(e), tau=t, prep=lab[0], read=lab[1])
        for c, e, t, lab in zip(counts, expectations, taus, labels)
    ]
    return FourSignals(*samples)
