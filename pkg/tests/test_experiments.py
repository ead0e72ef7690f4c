"""Adaptive loop, fixed-sweep baseline, timing, and speedup study."""

import json

import numpy as np
import pytest

from spinrelax.design import DelayGrid, DelayPair, TimingModel, nob_select_delays
from spinrelax.experiments import (
    ExperimentConfig,
    NAP_DEFAULT_DELAYS,
    RunRecord,
    TracePoint,
    delay_only_speedup,
    replicate_seeds,
    run_adaptive,
    run_nap,
    sigma_trace_slope,
    speedup_study,
    time_to_reach,
)
from spinrelax.posterior import PosteriorMoments, initial_grid
from spinrelax.rates import RatePair
from spinrelax.signals import SignalParams

TRUTH = RatePair(1.0, 3.0)


def fig_defaults(**overrides):
    base = dict(true_rates=TRUTH, optimizer="nob", iterations=10, seed=0)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_unknown_optimizer(self):
        with pytest.raises(ValueError):
            fig_defaults(optimizer="anneal")

    def test_nap_needs_delays(self):
        with pytest.raises(ValueError):
            fig_defaults(optimizer="nap")

    def test_scalar_nap_list_must_increase(self):
        with pytest.raises(ValueError):
            fig_defaults(optimizer="nap", nap_delays=(0.1, 0.1, 0.2))

    def test_pair_nap_list_any_order(self):
        cfg = fig_defaults(
            optimizer="nap", nap_delays=((0.3, 0.1), (0.05, 0.4)), iterations=0
        )
        assert len(cfg.nap_delay_pairs()) == 2

    def test_wrong_runner(self):
        with pytest.raises(ValueError):
            run_adaptive(fig_defaults(optimizer="nap", nap_delays=(0.1, 0.2)))
        with pytest.raises(ValueError):
            run_nap(fig_defaults(optimizer="nob"))


class TestAdaptiveRun:
    def test_noiseless_converges_fast(self):
        cfg = fig_defaults(iterations=5, noiseless=True, seed=1)
        rec = run_adaptive(cfg)
        # within the initial inference grid's cell size of the truth
        cell = (cfg.prior_bounds[1] - cfg.prior_bounds[0]) / (cfg.grid_size - 1)
        assert abs(rec.final.mean_plus - TRUTH.gamma_plus) < cell
        assert abs(rec.final.mean_minus - TRUTH.gamma_minus) < cell
        assert abs(rec.final.mean_plus - TRUTH.gamma_plus) < 0.5 * rec.final.sigma_plus
        assert rec.flagged_count == 0

    def test_noisy_run_near_truth(self):
        rec = run_adaptive(fig_defaults(iterations=12, seed=42))
        assert abs(rec.final.mean_plus - TRUTH.gamma_plus) < 4.0 * rec.final.sigma_plus
        assert abs(rec.final.mean_minus - TRUTH.gamma_minus) < 4.0 * rec.final.sigma_minus

    def test_delays_settle_near_true_rate_optimum(self):
        rec = run_adaptive(fig_defaults(iterations=12, seed=42))
        timing = TimingModel(repetitions_R=SignalParams().repetitions_R)
        fixed_point = nob_select_delays(TRUTH, timing)
        last = rec.iterations[-1].delays
        assert fixed_point.tau_plus / 2 < last.tau_plus < fixed_point.tau_plus * 2
        assert fixed_point.tau_minus / 2 < last.tau_minus < fixed_point.tau_minus * 2

    def test_clocks_and_duty(self):
        rec = run_adaptive(fig_defaults(iterations=6, seed=3))
        clocks = [r.cumulative_time_s for r in rec.iterations]
        assert all(b > a for a, b in zip(clocks, clocks[1:]))
        assert 0.0 < rec.duty_cycle <= 1.0
        assert rec.total_physical_s <= rec.total_time_s

    def test_configured_overhead_is_deterministic(self):
        rec = run_adaptive(fig_defaults(iterations=4, seed=5, selector_overhead_s=0.3))
        assert all(r.cpu_overhead_s == 0.3 for r in rec.iterations)
        assert rec.total_time_s == pytest.approx(rec.total_physical_s + 4 * 0.3)

    def test_live_cpu_recording(self):
        rec = run_adaptive(fig_defaults(iterations=2, seed=5, record_live_cpu=True))
        assert all(r.cpu_overhead_s > 0.0 for r in rec.iterations)

    def test_estimator_failure_flags_and_continues(self):
        dark = SignalParams(f0=1e-12, repetitions_R=10)
        cfg = fig_defaults(iterations=3, params=dark, seed=2)
        rec = run_adaptive(cfg)
        assert rec.flagged_count == 3
        assert len(rec.iterations) == 3
        prior = initial_grid(bounds=cfg.prior_bounds, size=cfg.grid_size)
        np.testing.assert_array_equal(rec.posterior.log_weights, prior.log_weights)

    def test_jsonl_and_summary(self):
        rec = run_adaptive(fig_defaults(iterations=3, seed=7))
        lines = rec.to_jsonl().strip().split("\n")
        assert len(lines) == 3
        row = json.loads(lines[0])
        for key in (
            "iteration",
            "tau_plus_ms",
            "gamma_plus_mean_per_ms",
            "sigma_m_minus",
            "cumulative_time_s",
        ):
            assert key in row
        summary = rec.summary_dict()
        assert summary["iterations"] == 3
        assert summary["duty_cycle"] == pytest.approx(rec.duty_cycle)

    def test_seed_reproducibility(self):
        a = run_adaptive(fig_defaults(iterations=5, seed=11))
        b = run_adaptive(fig_defaults(iterations=5, seed=11))
        c = run_adaptive(fig_defaults(iterations=5, seed=12))
        assert a.to_jsonl() == b.to_jsonl()
        assert a.to_jsonl() != c.to_jsonl()

    def test_pf_optimizer_runs(self):
        rec = run_adaptive(fig_defaults(optimizer="pf", iterations=8, seed=9))
        assert rec.flagged_count == 0
        assert abs(rec.final.mean_plus - TRUTH.gamma_plus) < 6.0 * rec.final.sigma_plus

    def test_drifting_alpha_stays_reasonable(self):
        drifts = {"alpha": lambda t: 0.8 - 0.2 * min(t / 5000.0, 1.0)}
        rec = run_adaptive(fig_defaults(iterations=10, seed=13, drifts=drifts))
        assert abs(rec.final.mean_plus - TRUTH.gamma_plus) < 4.0 * rec.final.sigma_plus
        assert abs(rec.final.mean_minus - TRUTH.gamma_minus) < 4.0 * rec.final.sigma_minus


class TestNapRun:
    def test_zero_sweeps_returns_prior(self):
        cfg = fig_defaults(optimizer="nap", iterations=0, nap_delays=NAP_DEFAULT_DELAYS)
        rec = run_nap(cfg)
        prior = initial_grid(bounds=cfg.prior_bounds, size=cfg.grid_size)
        np.testing.assert_array_equal(rec.posterior.log_weights, prior.log_weights)
        assert len(rec.iterations) == 0
        assert rec.total_time_s == 0.0

    def test_nap_with_nob_sequence_matches_adaptive_exactly(self):
        adaptive = run_adaptive(fig_defaults(iterations=8, seed=42))
        sequence = tuple(
            (r.delays.tau_plus, r.delays.tau_minus) for r in adaptive.iterations
        )
        nap = run_nap(
            fig_defaults(optimizer="nap", iterations=1, nap_delays=sequence, seed=42)
        )
        np.testing.assert_array_equal(
            nap.posterior.log_weights, adaptive.posterior.log_weights
        )
        np.testing.assert_array_equal(
            nap.posterior.gamma_plus_axis, adaptive.posterior.gamma_plus_axis
        )
        np.testing.assert_array_equal(
            nap.posterior.gamma_minus_axis, adaptive.posterior.gamma_minus_axis
        )

    def test_overhead_shifts_cumulative_times_exactly(self):
        base = fig_defaults(
            optimizer="nap", iterations=2, nap_delays=(0.05, 0.2, 0.8), seed=4
        )
        shifted = fig_defaults(
            optimizer="nap",
            iterations=2,
            nap_delays=(0.05, 0.2, 0.8),
            seed=4,
            timing=TimingModel(
                repetitions_R=SignalParams().repetitions_R, overhead_T0=2.5
            ),
        )
        a = run_nap(base)
        b = run_nap(shifted)
        for k, (ra, rb) in enumerate(zip(a.iterations, b.iterations), start=1):
            assert rb.cumulative_physical_s == pytest.approx(
                ra.cumulative_physical_s + 2.5 * k
            )

    def test_fixed_sweep_needs_longer_to_match_adaptive(self):
        # per-pairing speedup > 1 away from the slow-rate sweet spot
        params = SignalParams(repetitions_R=10**5)
        fast = RatePair(2.0, 2.0)
        ratios = []
        for seed in replicate_seeds(99, 3):
            adaptive = run_adaptive(
                fig_defaults(true_rates=fast, params=params, iterations=12, seed=seed)
            )
            nap = run_nap(
                fig_defaults(
                    true_rates=fast,
                    params=params,
                    optimizer="nap",
                    iterations=10**6,
                    nap_delays=NAP_DEFAULT_DELAYS,
                    seed=seed,
                ),
                max_physical_s=64.0 * adaptive.total_physical_s,
            )
            (tp, _), (tm, _) = time_to_reach(
                nap, adaptive.final.sigma_plus, adaptive.final.sigma_minus
            )
            ratios.append(
                (tp / adaptive.total_physical_s, tm / adaptive.total_physical_s)
            )
        med = np.median(ratios, axis=0)
        assert med[0] > 2.0
        assert med[1] > 2.0

    def test_single_optimal_delay_nap_within_2x(self):
        timing = TimingModel(repetitions_R=SignalParams().repetitions_R)
        best = nob_select_delays(TRUTH, timing)
        ratios = []
        for seed in replicate_seeds(7, 5):
            adaptive = run_adaptive(fig_defaults(iterations=8, seed=seed))
            nap = run_nap(
                fig_defaults(
                    optimizer="nap",
                    iterations=10 ** 6,
                    nap_delays=((best.tau_plus, best.tau_minus),),
                    seed=seed,
                ),
                max_physical_s=adaptive.total_physical_s,
            )
            ratios.append(
                (
                    nap.final.sigma_plus / adaptive.final.sigma_plus,
                    nap.final.sigma_minus / adaptive.final.sigma_minus,
                )
            )
        med = np.median(ratios, axis=0)
        assert med[0] < 2.0
        assert med[1] < 2.0


class TestTraceAnalysis:
    @staticmethod
    def synthetic_record(times, sigmas):
        points = tuple(
            TracePoint(time_s=t, physical_s=t, sigma_plus=s, sigma_minus=s)
            for t, s in zip(times, sigmas)
        )
        final = PosteriorMoments(1.0, 3.0, sigmas[-1], sigmas[-1], 0.0)
        return RunRecord(
            optimizer="nap",
            iterations=(),
            trace_points=points,
            final=final,
            posterior=None,
            total_time_s=times[-1],
            total_physical_s=times[-1],
            delay_time_s=times[-1],
            flagged_count=0,
        )

    def test_time_to_reach_interpolates_log_log(self):
        rec = self.synthetic_record([1.0, 4.0, 16.0], [4.0, 2.0, 1.0])
        (t, ok), _ = time_to_reach(rec, 2.0, 2.0)
        assert ok and t == pytest.approx(4.0)
        (t, ok), _ = time_to_reach(rec, np.sqrt(2.0), np.sqrt(2.0))
        assert ok and t == pytest.approx(8.0, rel=1e-12)

    def test_time_to_reach_extrapolates_before_first_point(self):
        rec = self.synthetic_record([1.0, 4.0, 16.0], [4.0, 2.0, 1.0])
        (t, ok), _ = time_to_reach(rec, 5.0, 5.0)
        assert ok and t == pytest.approx((4.0 / 5.0) ** 2)

    def test_time_to_reach_flags_unreached(self):
        rec = self.synthetic_record([1.0, 4.0, 16.0], [4.0, 2.0, 1.0])
        (t, ok), _ = time_to_reach(rec, 0.5, 0.5)
        assert not ok and t == 16.0

    def test_envelope_handles_nonmonotone_traces(self):
        rec = self.synthetic_record([1.0, 4.0, 16.0, 64.0], [4.0, 2.0, 3.0, 1.0])
        (t, ok), _ = time_to_reach(rec, 1.5, 1.5)
        assert ok and 16.0 < t < 64.0

    def test_sigma_slope_near_square_root(self):
        rec = run_adaptive(fig_defaults(iterations=30, seed=17))
        slope = sigma_trace_slope(rec, "+")
        assert -0.6 <= slope <= -0.4

    def test_delay_only_speedup_direction(self):
        # the fixed sweep idles less, so delay-only speedup can only grow
        assert delay_only_speedup(2.0, 0.817, 0.895) >= 2.0
        with pytest.raises(ValueError):
            delay_only_speedup(2.0, 0.0, 0.9)


@pytest.fixture(scope="module")
def small_study():
    params = SignalParams(repetitions_R=10**5)
    return speedup_study(
        [(0.055, 0.055), (2.0, 2.0)],
        params=params,
        replicates=3,
        adaptive_iterations=10,
        seed=21,
    )


class TestSpeedupStudy:
    def test_pairings_and_structure(self, small_study):
        assert len(small_study.points) == 2
        for point in small_study.points:
            assert point.pairings == 9
            assert point.std_plus >= 0.0

    def test_sweet_spot_versus_fast_rates(self, small_study):
        sweet, fast = small_study.points
        assert sweet.mean_plus < 3.0
        assert fast.mean_plus > 3.0 * sweet.mean_plus

    def test_table_export(self, small_study):
        text = small_study.to_text()
        lines = text.strip().split("\n")
        assert lines[0].split("\t") == list(small_study.COLUMNS)
        assert len(lines) == 3
        payload = small_study.to_json_dict()
        assert payload["format"] == "speedup-study-v1"
        assert len(payload["points"]) == 2

    def test_replicate_seeds_are_distinct(self):
        seeds = replicate_seeds(0, 64)
        assert len(set(seeds)) == 64
        assert seeds == replicate_seeds(0, 64)
