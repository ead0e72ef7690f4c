"""Simulated relaxometry runs: adaptive loop, fixed-sweep baseline, speedups.

The adaptive loop iterates delay selection (grid cost minimization, or a
particle-cloud utility), four-signal acquisition per branch, ratio
estimation, and a Bayesian grid update.  The non-adaptive baseline cycles a
fixed delay list, accumulates counts per delay, and recomputes its
posterior from the aggregates after every sweep using the very same
estimator and inference calls.  The speedup study pairs replicate
ensembles of the two arms and reports how much longer the fixed sweep
needs to match the adaptive final uncertainty.

Delays are milliseconds, rates 1/ms, wall-clock seconds throughout.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .design import (
    DelayGrid,
    DelayPair,
    ParticleCloud,
    ROBUST_CURVES,
    TimingModel,
    nob_select_delays,
    pf_select_delays,
)
from .estimator import EstimationError, measurement_estimate
from .posterior import (
    DEFAULT_BOUNDS,
    GRID_SIZE,
    MeasurementPair,
    PosteriorMoments,
    UpdateRejected,
    bayes_update,
    initial_grid,
    moments,
    regrid,
)
from .protocols import measurement_curves
from .rates import RatePair
from .signals import (
    FourSignals,
    ProtocolSpec,
    ROBUST_PROTOCOL,
    SignalParams,
    SignalSample,
    expected_counts,
    sample_signals,
)

__all__ = [
    "NAP_DEFAULT_DELAYS",
    "OPTIMIZERS",
    "ExperimentConfig",
    "IterationRecord",
    "TracePoint",
    "RunRecord",
    "run_adaptive",
    "run_nap",
    "replicate_seeds",
    "time_to_reach",
    "sigma_trace_slope",
    "delay_only_speedup",
    "SpeedupPoint",
    "SpeedupStudy",
    "speedup_study",
]

OPTIMIZERS = ("nob", "pf", "nap")

# Fixed-sweep default: 20 log-spaced delays, 3 microseconds to 5.5 ms.
NAP_DEFAULT_DELAYS = tuple(np.geomspace(3e-3, 5.5, 20))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one simulated run depends on.

    `iterations` counts adaptive iterations, or full sweeps for the "nap"
    optimizer.  `nap_delays` entries are scalars (both branches at that
    delay) or (tau_plus, tau_minus) pairs; scalar lists must be strictly
    increasing, pair lists are taken in the given acquisition order.
    `drifts` maps SignalParams field names to callables of wall-clock
    seconds.  `selector_overhead_s` is the deterministic per-iteration CPU
    charge recorded in the run; set `record_live_cpu` to log measured
    selection wall-clock instead (at the price of nondeterministic records).
    """

    true_rates: RatePair
    params: SignalParams = SignalParams()
    protocol: ProtocolSpec = ROBUST_PROTOCOL
    optimizer: str = "nob"
    iterations: int = 30
    nap_delays: tuple = ()
    delay_grid: object = None
    prior_bounds: tuple = DEFAULT_BOUNDS
    grid_size: int = GRID_SIZE
    timing: object = None
    seed: int = 0
    noiseless: bool = False
    drifts: object = None
    particle_count: int = 20000
    selector_overhead_s: float = 0.0
    record_live_cpu: bool = False

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if not (int(self.iterations) == self.iterations and self.iterations >= 0):
            raise ValueError("iterations must be a nonnegative integer")
        lo, hi = self.prior_bounds
        if not (0.0 < lo < hi):
            raise ValueError("prior_bounds must satisfy 0 < lo < hi")
        if self.optimizer == "nap" and len(self.nap_delays) == 0:
            raise ValueError("the nap optimizer needs a nonempty nap_delays list")
        if self.nap_delays:
            scalars = [d for d in self.nap_delays if np.ndim(d) == 0]
            if len(scalars) == len(self.nap_delays):
                values = np.asarray(scalars, dtype=float)
                if np.any(values <= 0.0) or np.any(np.diff(values) <= 0.0):
                    raise ValueError("scalar nap_delays must be positive and strictly increasing")
        if self.selector_overhead_s < 0.0:
            raise ValueError("selector_overhead_s must be nonnegative")

    def resolved_timing(self):
        if self.timing is not None:
            return self.timing
        return TimingModel(repetitions_R=self.params.repetitions_R)

    def resolved_delay_grid(self):
        return self.delay_grid if self.delay_grid is not None else DelayGrid.default()

    def nap_delay_pairs(self):
        pairs = []
        for d in self.nap_delays:
            if np.ndim(d) == 0:
                pairs.append(DelayPair(tau_plus=float(d), tau_minus=float(d)))
            else:
                tp, tm = d
                pairs.append(DelayPair(tau_plus=float(tp), tau_minus=float(tm)))
        return pairs


@dataclass(frozen=True)
class IterationRecord:
    """One acquisition: chosen delays, estimate, posterior state, clocks."""

    index: int
    delays: DelayPair
    measurement: object
    flagged: bool
    mean_plus: float
    mean_minus: float
    sigma_plus: float
    sigma_minus: float
    duration_s: float
    cpu_overhead_s: float
    cumulative_time_s: float
    cumulative_physical_s: float

    def to_json_dict(self):
        m = self.measurement
        return {
            "iteration": self.index,
            "tau_plus_ms": self.delays.tau_plus,
            "tau_minus_ms": self.delays.tau_minus,
            "m_plus": None if m is None else m.m_plus,
            "m_minus": None if m is None else m.m_minus,
            "sigma_m_plus": None if m is None else m.sigma_plus,
            "sigma_m_minus": None if m is None else m.sigma_minus,
            "flagged": self.flagged,
            "gamma_plus_mean_per_ms": self.mean_plus,
            "gamma_minus_mean_per_ms": self.mean_minus,
            "gamma_plus_sigma_per_ms": self.sigma_plus,
            "gamma_minus_sigma_per_ms": self.sigma_minus,
            "duration_s": self.duration_s,
            "cpu_overhead_s": self.cpu_overhead_s,
            "cumulative_time_s": self.cumulative_time_s,
            "cumulative_physical_s": self.cumulative_physical_s,
        }


@dataclass(frozen=True)
class TracePoint:
    """Posterior width after one completed update, against both clocks."""

    time_s: float
    physical_s: float
    sigma_plus: float
    sigma_minus: float


@dataclass(frozen=True)
class RunRecord:
    optimizer: str
    iterations: tuple
    trace_points: tuple
    final: PosteriorMoments
    posterior: object
    total_time_s: float
    total_physical_s: float
    delay_time_s: float
    flagged_count: int

    def __post_init__(self):
        clocks = [r.cumulative_time_s for r in self.iterations]
        if any(b <= a for a, b in zip(clocks, clocks[1:])):
            raise ValueError("cumulative times must be strictly increasing")

    @property
    def duty_cycle(self):
        """Fraction of the total wall clock spent in relaxation delays."""
        if self.total_time_s == 0.0:
            return 0.0
        return self.delay_time_s / self.total_time_s

    def trace(self, with_overhead=True):
        """(times_s, sigma_plus, sigma_minus) arrays over completed updates."""
        times = np.array(
            [p.time_s if with_overhead else p.physical_s for p in self.trace_points]
        )
        sp = np.array([p.sigma_plus for p in self.trace_points])
        sm = np.array([p.sigma_minus for p in self.trace_points])
        return times, sp, sm

    def to_jsonl(self):
        lines = [json.dumps(r.to_json_dict()) for r in self.iterations]
        return "\n".join(lines) + ("\n" if lines else "")

    def summary_dict(self):
        return {
            "optimizer": self.optimizer,
            "iterations": len(self.iterations),
            "flagged": self.flagged_count,
            "gamma_plus_mean_per_ms": self.final.mean_plus,
            "gamma_minus_mean_per_ms": self.final.mean_minus,
            "gamma_plus_sigma_per_ms": self.final.sigma_plus,
            "gamma_minus_sigma_per_ms": self.final.sigma_minus,
            "covariance_per_ms2": self.final.covariance,
            "total_time_s": self.total_time_s,
            "total_physical_s": self.total_physical_s,
            "delay_time_s": self.delay_time_s,
            "duty_cycle": self.duty_cycle,
        }


def _branch_model(protocol):
    """Likelihood model callable for the protocol; None = closed robust form."""
    if protocol == ROBUST_PROTOCOL:
        return None
    return measurement_curves(protocol).value


def _selection_curves(protocol):
    if protocol == ROBUST_PROTOCOL:
        return ROBUST_CURVES
    return measurement_curves(protocol)


def _expectation_signals(measurement, tau, rates, params):
    """Noiseless stand-in for sample_signals: counts equal expectations."""
    (p1, r1), (p2, r2) = measurement.first, measurement.second
    samples = []
    for (prep, read), t in (((p1, r1), tau), ((p2, r2), tau), ((p1, r1), 0.0), ((p2, r2), 0.0)):
        mean = float(expected_counts(prep, read, t, rates, params))
        samples.append(
            SignalSample(counts=mean, expectation=mean, tau=t, prep=prep, read=read)
        )
    return FourSignals(*samples)


def _branch_durations(timing, delays):
    """Split one iteration's duration between the two branch acquisitions."""
    half_fixed = 4.0 * timing.repetitions_R * timing.per_shot_time + timing.overhead_T0 / 2.0
    d_plus = 2.0 * timing.repetitions_R * delays.tau_plus * 1e-3 + half_fixed
    d_minus = 2.0 * timing.repetitions_R * delays.tau_minus * 1e-3 + half_fixed
    return d_plus, d_minus


def _acquire_four(config, measurement, tau, rng, t_start, duration_s):
    if config.noiseless:
        return _expectation_signals(measurement, tau, config.true_rates, config.params)
    return sample_signals(
        measurement,
        tau,
        config.true_rates,
        config.params,
        rng,
        drifts=config.drifts,
        t_start=t_start,
        duration_s=duration_s,
    )


def _acquire_pair(config, plus, minus, delays, rng, t_start, timing):
    """Sample both branches, then estimate.

    Sampling happens for both branches before any estimation so the random
    stream advances identically whether or not an estimate fails.
    """
    d_plus, d_minus = _branch_durations(timing, delays)
    four_plus = _acquire_four(config, plus, delays.tau_plus, rng, t_start, d_plus)
    four_minus = _acquire_four(
        config, minus, delays.tau_minus, rng, t_start + d_plus, d_minus
    )
    return four_plus, four_minus


def _estimate_pair(four_plus, four_minus, delays):
    est_plus = measurement_estimate(four_plus)
    est_minus = measurement_estimate(four_minus)
    return MeasurementPair(
        m_plus=est_plus.m_bar,
        m_minus=est_minus.m_bar,
        sigma_plus=est_plus.sigma_m,
        sigma_minus=est_minus.sigma_m,
        tau_plus=delays.tau_plus,
        tau_minus=delays.tau_minus,
    )


def run_adaptive(config):
    """Adaptive estimation run; returns the full per-iteration RunRecord.

    Each iteration selects delays from the current posterior, acquires the
    four signals of both branches, folds the ratio estimates into the
    posterior, and regrids.  A failed estimate or rejected update flags the
    iteration and leaves the posterior unchanged.
    """
    if config.optimizer not in ("nob", "pf"):
        raise ValueError("run_adaptive needs optimizer 'nob' or 'pf'")
    rng = np.random.default_rng(config.seed)
    timing = config.resolved_timing()
    grid_spec = config.resolved_delay_grid()
    curves = _selection_curves(config.protocol)
    model = _branch_model(config.protocol)
    posterior = initial_grid(bounds=config.prior_bounds, size=config.grid_size)
    plus = config.protocol.plus.oriented(config.params)
    minus = config.protocol.minus.oriented(config.params)

    records = []
    trace = []
    t_total = 0.0
    t_physical = 0.0
    t_delay = 0.0
    flagged_count = 0
    for n in range(config.iterations):
        started = time.perf_counter()
        current = moments(posterior)
        if config.optimizer == "nob":
            delays = nob_select_delays(current, timing, grid_spec, curves)
        else:
            cloud = ParticleCloud.from_grid(posterior, config.particle_count, rng)
            delays = pf_select_delays(cloud, timing, grid_spec, curves)
        measured = time.perf_counter() - started
        cpu = measured if config.record_live_cpu else config.selector_overhead_s

        duration = float(timing.duration_seconds(delays.tau_plus, delays.tau_minus))
        four_plus, four_minus = _acquire_pair(
            config, plus, minus, delays, rng, t_physical, timing
        )
        pair = None
        flagged = False
        try:
            pair = _estimate_pair(four_plus, four_minus, delays)
            posterior = regrid(bayes_update(posterior, pair, model=model), config.grid_size)
        except (EstimationError, UpdateRejected):
            flagged = True
            flagged_count += 1

        t_physical += duration
        t_total += duration + cpu
        t_delay += 2.0 * timing.repetitions_R * (delays.tau_plus + delays.tau_minus) * 1e-3
        state = moments(posterior)
        records.append(
            IterationRecord(
                index=n,
                delays=delays,
                measurement=pair,
                flagged=flagged,
                mean_plus=state.mean_plus,
                mean_minus=state.mean_minus,
                sigma_plus=state.sigma_plus,
                sigma_minus=state.sigma_minus,
                duration_s=duration,
                cpu_overhead_s=cpu,
                cumulative_time_s=t_total,
                cumulative_physical_s=t_physical,
            )
        )
        if not flagged:
            trace.append(
                TracePoint(
                    time_s=t_total,
                    physical_s=t_physical,
                    sigma_plus=state.sigma_plus,
                    sigma_minus=state.sigma_minus,
                )
            )

    return RunRecord(
        optimizer=config.optimizer,
        iterations=tuple(records),
        trace_points=tuple(trace),
        final=moments(posterior),
        posterior=posterior,
        total_time_s=t_total,
        total_physical_s=t_physical,
        delay_time_s=t_delay,
        flagged_count=flagged_count,
    )


class _Aggregate:
    """Per-delay accumulated counts and expectations for one branch."""

    def __init__(self, measurement, tau):
        self.measurement = measurement
        self.tau = tau
        self.counts = [0.0, 0.0, 0.0, 0.0]
        self.expectations = [0.0, 0.0, 0.0, 0.0]

    def add(self, four):
        for k, sample in enumerate(four.as_tuple()):
            self.counts[k] += sample.counts
            self.expectations[k] += sample.expectation

    def four_signals(self):
        (p1, r1), (p2, r2) = self.measurement.first, self.measurement.second
        labels = [(p1, r1), (p2, r2), (p1, r1), (p2, r2)]
        taus = [self.tau, self.tau, 0.0, 0.0]
        samples = [
            SignalSample(counts=c, expectation=e, tau=t, prep=lab[0], read=lab[1])
            for c, e, t, lab in zip(self.counts, self.expectations, taus, labels)
        ]
        return FourSignals(*samples)


def run_nap(config, stop_sigma=None, max_physical_s=None):
    """Fixed-list run: sweep, accumulate, recompute from aggregates.

    After each sweep the posterior is rebuilt from a fresh prior by folding
    in one aggregate measurement pair per delay, in list order, through the
    same update and regrid calls as the adaptive loop; with zero sweeps the
    prior is returned unchanged.  `stop_sigma` (pair) ends the run early
    once both posterior widths drop below it; `max_physical_s` caps the
    accumulated acquisition time.  Delays carrying an unusable aggregate
    (zero counts) are skipped and counted as flagged for that sweep.
    """
    if config.optimizer != "nap":
        raise ValueError("run_nap needs optimizer 'nap'")
    rng = np.random.default_rng(config.seed)
    timing = config.resolved_timing()
    model = _branch_model(config.protocol)
    plus = config.protocol.plus.oriented(config.params)
    minus = config.protocol.minus.oriented(config.params)
    pairs = config.nap_delay_pairs()
    aggregates = [
        (_Aggregate(plus, d.tau_plus), _Aggregate(minus, d.tau_minus)) for d in pairs
    ]

    posterior = initial_grid(bounds=config.prior_bounds, size=config.grid_size)
    records = []
    trace = []
    t_total = 0.0
    t_physical = 0.0
    t_delay = 0.0
    flagged_count = 0
    probe_index = 0
    state = moments(posterior)
    for sweep in range(config.iterations):
        for (agg_plus, agg_minus), delays in zip(aggregates, pairs):
            four_plus, four_minus = _acquire_pair(
                config, plus, minus, delays, rng, t_physical, timing
            )
            agg_plus.add(four_plus)
            agg_minus.add(four_minus)
            duration = float(timing.duration_seconds(delays.tau_plus, delays.tau_minus))
            t_physical += duration
            t_total += duration
            t_delay += (
                2.0 * timing.repetitions_R * (delays.tau_plus + delays.tau_minus) * 1e-3
            )
            try:
                probe = _estimate_pair(four_plus, four_minus, delays)
            except EstimationError:
                probe = None
            records.append(
                IterationRecord(
                    index=probe_index,
                    delays=delays,
                    measurement=probe,
                    flagged=probe is None,
                    mean_plus=state.mean_plus,
                    mean_minus=state.mean_minus,
                    sigma_plus=state.sigma_plus,
                    sigma_minus=state.sigma_minus,
                    duration_s=duration,
                    cpu_overhead_s=0.0,
                    cumulative_time_s=t_total,
                    cumulative_physical_s=t_physical,
                )
            )
            probe_index += 1

        started = time.perf_counter()
        rebuilt = initial_grid(bounds=config.prior_bounds, size=config.grid_size)
        for agg_plus, agg_minus in aggregates:
            try:
                pair = _estimate_pair(
                    agg_plus.four_signals(),
                    agg_minus.four_signals(),
                    DelayPair(tau_plus=agg_plus.tau, tau_minus=agg_minus.tau),
                )
                rebuilt = regrid(bayes_update(rebuilt, pair, model=model), config.grid_size)
            except (EstimationError, UpdateRejected):
                flagged_count += 1
        posterior = rebuilt
        cpu = time.perf_counter() - started if config.record_live_cpu else config.selector_overhead_s
        t_total += cpu
        state = moments(posterior)
        trace.append(
            TracePoint(
                time_s=t_total,
                physical_s=t_physical,
                sigma_plus=state.sigma_plus,
                sigma_minus=state.sigma_minus,
            )
        )
        if stop_sigma is not None and (
            state.sigma_plus <= stop_sigma[0] and state.sigma_minus <= stop_sigma[1]
        ):
            break
        if max_physical_s is not None and t_physical >= max_physical_s:
            break

    return RunRecord(
        optimizer=config.optimizer,
        iterations=tuple(records),
        trace_points=tuple(trace),
        final=moments(posterior),
        posterior=posterior,
        total_time_s=t_total,
        total_physical_s=t_physical,
        delay_time_s=t_delay,
        flagged_count=flagged_count,
    )


def replicate_seeds(base_seed, count):
    """Independent child seeds for parallel-safe replicate streams."""
    seq = np.random.SeedSequence(base_seed)
    return [int(child.generate_state(1)[0]) for child in seq.spawn(count)]


def time_to_reach(record, target_plus, target_minus, with_overhead=False):
    """Earliest times at which each posterior width reaches its target.

    Uses the running-minimum envelope of the sigma trace with log-log
    interpolation between points, and a 1/sqrt(T) extrapolation before the
    first point.  Returns ((t_plus, reached_plus), (t_minus, reached_minus));
    an unreached target reports the last trace time with reached = False.
    """
    times, sp, sm = record.trace(with_overhead=with_overhead)
    if times.size == 0:
        raise ValueError("record carries no completed updates")
    out = []
    for sigma, target in ((sp, target_plus), (sm, target_minus)):
        envelope = np.minimum.accumulate(sigma)
        if target >= envelope[0]:
            out.append((float(times[0] * (envelope[0] / target) ** 2), True))
            continue
        below = np.nonzero(envelope <= target)[0]
        if below.size == 0:
            out.append((float(times[-1]), False))
            continue
        k = int(below[0])
        t_hi, e_hi = times[k], envelope[k]
        t_lo, e_lo = times[k - 1], envelope[k - 1]
        if e_hi == e_lo:
            out.append((float(t_hi), True))
            continue
        frac = (np.log(target) - np.log(e_lo)) / (np.log(e_hi) - np.log(e_lo))
        out.append((float(np.exp(np.log(t_lo) + frac * (np.log(t_hi) - np.log(t_lo)))), True))
    return out[0], out[1]


def sigma_trace_slope(record, branch="+", decades=1.0, with_overhead=False):
    """Log-log slope of the posterior width trace over its final decade(s)."""
    times, sp, sm = record.trace(with_overhead=with_overhead)
    sigma = sp if branch == "+" else sm
    if times.size < 3:
        raise ValueError("need at least three trace points to fit a slope")
    keep = times >= times[-1] / 10.0 ** decades
    if keep.sum() < 3:
        keep = np.ones_like(times, dtype=bool)
    slope = np.polyfit(np.log(times[keep]), np.log(sigma[keep]), 1)[0]
    return float(slope)


def delay_only_speedup(total_speedup, duty_adaptive, duty_fixed):
    """Rescale a total-time speedup to count only the relaxation delays.

    With the fixed sweep spending a larger fraction of its wall clock in
    delays than the adaptive run, the delay-only speedup can only grow.
    """
    if not (0.0 < duty_adaptive <= 1.0 and 0.0 < duty_fixed <= 1.0):
        raise ValueError("duty cycles must lie in (0, 1]")
    return total_speedup * duty_fixed / duty_adaptive


@dataclass(frozen=True)
class SpeedupPoint:
    """Paired-ensemble speedup statistics at one true rate pair."""

    gamma_plus_per_ms: float
    gamma_minus_per_ms: float
    mean_plus: float
    std_plus: float
    mean_minus: float
    std_minus: float
    pairings: int
    lower_bound_pairings: int


@dataclass(frozen=True)
class SpeedupStudy:
    points: tuple
    replicates: int

    COLUMNS = (
        "gamma_plus_per_ms",
        "gamma_minus_per_ms",
        "speedup_plus_mean",
        "speedup_plus_std",
        "speedup_minus_mean",
        "speedup_minus_std",
        "pairings",
        "lower_bound_pairings",
    )

    def to_text(self, delimiter="\t"):
        lines = [delimiter.join(self.COLUMNS)]
        for p in self.points:
            lines.append(
                delimiter.join(
                    [
                        f"{p.gamma_plus_per_ms:.6g}",
                        f"{p.gamma_minus_per_ms:.6g}",
                        f"{p.mean_plus:.6g}",
                        f"{p.std_plus:.6g}",
                        f"{p.mean_minus:.6g}",
                        f"{p.std_minus:.6g}",
                        str(p.pairings),
                        str(p.lower_bound_pairings),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self):
        return {
            "format": "speedup-study-v1",
            "replicates": self.replicates,
            "points": [
                dict(zip(self.COLUMNS, (
                    p.gamma_plus_per_ms,
                    p.gamma_minus_per_ms,
                    p.mean_plus,
                    p.std_plus,
                    p.mean_minus,
                    p.std_minus,
                    p.pairings,
                    p.lower_bound_pairings,
                )))
                for p in self.points
            ],
        }


def speedup_study(
    rate_pairs,
    params=None,
    replicates=30,
    adaptive_iterations=20,
    nap_delays=NAP_DEFAULT_DELAYS,
    adaptive_grid=None,
    prior_bounds=DEFAULT_BOUNDS,
    grid_size=GRID_SIZE,
    budget_factor=64.0,
    seed=0,
):
    """Paired adaptive-vs-fixed ensemble study over true rate pairs.

    For each rate pair, runs `replicates` adaptive and fixed-sweep
    replicates with independent seed streams, then compares every pairing:
    the fixed arm's interpolated time to reach the adaptive run's final
    widths, over the adaptive run's total time.  The fixed arm stops early
    once it beats the easiest target comfortably and is capped at
    `budget_factor` times the longest adaptive run; pairings that never
    reach their target within the cap are reported at the cap and counted
    as lower bounds.  Physical acquisition time only; selector CPU is
    excluded on both arms.
    """
    if params is None:
        params = SignalParams()
    if replicates < 2:
        raise ValueError("need at least two replicates per arm")
    if adaptive_grid is None:
        # wide selection range so slow rates stay optimally measurable
        adaptive_grid = DelayGrid.wide()
    rate_pairs = [(float(a), float(b)) for a, b in rate_pairs]
    points = []
    seeds = replicate_seeds(seed, 2 * replicates * len(rate_pairs))
    seed_iter = iter(seeds)
    for gp, gm in rate_pairs:
        rates = RatePair(float(gp), float(gm))
        adaptive_runs = []
        for _ in range(replicates):
            cfg = ExperimentConfig(
                true_rates=rates,
                params=params,
                optimizer="nob",
                iterations=adaptive_iterations,
                delay_grid=adaptive_grid,
                prior_bounds=prior_bounds,
                grid_size=grid_size,
                seed=next(seed_iter),
            )
            adaptive_runs.append(run_adaptive(cfg))
        targets = [(r.final.sigma_plus, r.final.sigma_minus) for r in adaptive_runs]
        tightest = (min(t[0] for t in targets), min(t[1] for t in targets))
        budget = budget_factor * max(r.total_physical_s for r in adaptive_runs)

        nap_runs = []
        for _ in range(replicates):
            cfg = ExperimentConfig(
                true_rates=rates,
                params=params,
                optimizer="nap",
                iterations=10 ** 9,  # capped by budget / stop rule below
                nap_delays=tuple(nap_delays),
                prior_bounds=prior_bounds,
                grid_size=grid_size,
                seed=next(seed_iter),
            )
            nap_runs.append(
                run_nap(
                    cfg,
                    stop_sigma=(0.95 * tightest[0], 0.95 * tightest[1]),
                    max_physical_s=budget,
                )
            )

        speedups_plus = []
        speedups_minus = []
        lower_bounds = 0
        for adaptive in adaptive_runs:
            for nap in nap_runs:
                (t_plus, ok_plus), (t_minus, ok_minus) = time_to_reach(
                    nap, adaptive.final.sigma_plus, adaptive.final.sigma_minus
                )
                if not (ok_plus and ok_minus):
                    lower_bounds += 1
                speedups_plus.append(t_plus / adaptive.total_physical_s)
                speedups_minus.append(t_minus / adaptive.total_physical_s)
        points.append(
            SpeedupPoint(
                gamma_plus_per_ms=rates.gamma_plus,
                gamma_minus_per_ms=rates.gamma_minus,
                mean_plus=float(np.mean(speedups_plus)),
                std_plus=float(np.std(speedups_plus, ddof=1)),
                mean_minus=float(np.mean(speedups_minus)),
                std_minus=float(np.std(speedups_minus, ddof=1)),
                pairings=len(speedups_plus),
                lower_bound_pairings=lower_bounds,
            )
        )
    return SpeedupStudy(points=tuple(points), replicates=replicates)
