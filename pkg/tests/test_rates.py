"""Kinetics core: propagator and model functions against independent oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import expm_propagator, fd_model_gradient
from spinrelax.rates import (
    RatePair,
    decay_constants,
    model_gradient,
    model_m,
    model_m_optimal,
    propagator,
)

# Frozen via two independent oracles (scipy expm propagator ratio and a
# 40-digit direct evaluation of the two-exponential closed form).
M_PLUS_1_13 = 0.0811818423493034
M_MINUS_1_13 = -0.0158951705789451

rates_strategy = st.floats(min_value=0.05, max_value=50.0, allow_nan=False)


def random_rates(rng, lo=0.01, hi=100.0):
    gp, gm = np.exp(rng.uniform(np.log(lo), np.log(hi), 2))
    return RatePair(float(gp), float(gm))


class TestRatePair:
    def test_rejects_nonpositive_and_nonfinite(self):
        for gp, gm in [(0.0, 1.0), (1.0, -2.0), (np.nan, 1.0), (1.0, np.inf)]:
            with pytest.raises(ValueError):
                RatePair(gp, gm)

    def test_spectral_split_bounds(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            r = random_rates(rng)
            fast, slow = decay_constants(r)
            g = (fast - slow) / 2.0
            assert g >= max(r.gamma_plus, r.gamma_minus) / 2.0 - 1e-12
            assert g <= r.gamma_plus + r.gamma_minus + 1e-12
            assert slow > 0.0


class TestPropagator:
    def test_identity_at_zero(self):
        p = propagator(0.0, RatePair(2.3, 0.4))
        assert np.array_equal(p.entries, np.eye(3))

    def test_uniform_equilibrium_at_long_times(self):
        p = propagator(1e4, RatePair(1.0, 3.0))
        assert np.allclose(p.entries, 1.0 / 3.0, atol=1e-12)

    def test_matches_matrix_exponential(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            r = random_rates(rng)
            tau = float(10 ** rng.uniform(-3, 1.5))
            got = propagator(tau, r).entries
            want = expm_propagator(tau, r.gamma_plus, r.gamma_minus)
            assert np.abs(got - want).max() < 1e-10

    def test_equal_rates_degenerate_basis(self):
        # The naive slow-branch eigenvector vanishes at gp = gm; the stable
        # construction must not care.
        for gp in (0.05, 1.0, 55.0):
            got = propagator(0.37, RatePair(gp, gp)).entries
            want = expm_propagator(0.37, gp, gp)
            assert np.abs(got - want).max() < 1e-12

    def test_invariants(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            r = random_rates(rng)
            tau = float(10 ** rng.uniform(-3, 1))
            p = propagator(tau, r).entries
            assert np.allclose(p, p.T, atol=1e-13)
            assert np.allclose(p.sum(axis=0), 1.0, atol=1e-12)
            assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
            assert p.min() >= 0.0 and p.max() <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(
        gp=rates_strategy,
        gm=rates_strategy,
        tau1=st.floats(min_value=0.0, max_value=3.0),
        tau2=st.floats(min_value=0.0, max_value=3.0),
    )
    def test_composition(self, gp, gm, tau1, tau2):
        r = RatePair(gp, gm)
        combined = propagator(tau1 + tau2, r).entries
        chained = propagator(tau1, r).entries @ propagator(tau2, r).entries
        assert np.abs(combined - chained).max() < 1e-10

    def test_vectorized_tau(self):
        r = RatePair(1.0, 3.0)
        taus = np.array([0.0, 0.1, 1.0, 10.0])
        batch = propagator(taus, r).entries
        assert batch.shape == (4, 3, 3)
        for k, tau in enumerate(taus):
            assert np.array_equal(batch[k], propagator(float(tau), r).entries)

    def test_rejects_bad_tau(self):
        with pytest.raises(ValueError):
            propagator(-0.1, RatePair(1.0, 1.0))
        with pytest.raises(ValueError):
            propagator(np.nan, RatePair(1.0, 1.0))


class TestModelM:
    def test_normalized_at_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            r = random_rates(rng)
            for branch in "+-":
                assert model_m(0.0, r, branch) == 1.0

    def test_equal_rates_single_exponential(self):
        assert np.isclose(model_m(1.0, RatePair(1.0, 1.0), "+"), np.exp(-3.0), atol=1e-15)
        assert np.isclose(model_m(0.25, RatePair(2.0, 2.0), "-"), np.exp(-1.5), atol=1e-15)

    def test_frozen_values(self):
        r = RatePair(1.0, 3.0)
        assert abs(float(model_m(1.0, r, "+")) - M_PLUS_1_13) < 1e-14
        assert abs(float(model_m(1.0, r, "-")) - M_MINUS_1_13) < 1e-14

    def test_agrees_with_propagator_ratio(self):
        # model_m must equal (p00(tau) - p_b0(tau)) / (p00(0) - p_b0(0));
        # the tau = 0 denominator of the ideal normalized pair is exactly 1.
        rng = np.random.default_rng(5)
        for _ in range(200):
            r = random_rates(rng)
            tau = float(10 ** rng.uniform(-3, 1))
            p = propagator(tau, r).entries
            assert abs(model_m(tau, r, "+") - (p[1, 1] - p[2, 1])) < 1e-12
            assert abs(model_m(tau, r, "-") - (p[1, 1] - p[0, 1])) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(gp=rates_strategy, gm=rates_strategy, tau=st.floats(min_value=0.0, max_value=20.0))
    def test_exchange_symmetry_exact(self, gp, gm, tau):
        assert model_m(tau, (gp, gm), "+") == model_m(tau, (gm, gp), "-")

    def test_bounded_and_decaying(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            r = random_rates(rng, 0.05, 30.0)
            slowest = min(r.gamma_plus, r.gamma_minus)
            taus = np.geomspace(1e-4 / slowest, 1e3 / slowest, 60)
            for branch in "+-":
                vals = model_m(taus, r, branch)
                assert np.all(vals <= 1.0) and np.all(vals > -1.0)
                assert abs(vals[-1]) < 1e-8

    def test_grid_broadcasting(self):
        gp = np.linspace(0.5, 2.0, 7)[:, None]
        gm = np.linspace(1.0, 4.0, 5)[None, :]
        vals = model_m(0.3, (gp, gm), "+")
        assert vals.shape == (7, 5)
        assert np.isclose(vals[2, 3], model_m(0.3, RatePair(gp[2, 0], gm[0, 3]), "+"))


class TestModelGradient:
    def test_zero_at_tau_zero(self):
        d_plus, d_minus = model_gradient(0.0, RatePair(1.7, 0.3), "+")
        assert d_plus == 0.0 and d_minus == 0.0

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(29)
        worst = 0.0
        for _ in range(400):
            gp, gm = np.exp(rng.uniform(np.log(0.3), np.log(5.0), 2))
            tau = float(10 ** rng.uniform(np.log10(0.05), np.log10(1.5)))
            for branch in "+-":
                analytic = model_gradient(tau, (gp, gm), branch)
                fd = fd_model_gradient(tau, gp, gm, branch)
                for a, f in zip(analytic, fd):
                    rel = abs(a - f) / max(abs(a), abs(f), 1e-12)
                    worst = max(worst, rel)
        assert worst < 1e-5

    def test_exchange_symmetry(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            gp, gm = np.exp(rng.uniform(np.log(0.1), np.log(10.0), 2))
            tau = float(10 ** rng.uniform(-2, 0.5))
            _, d_other = model_gradient(tau, (gp, gm), "+")
            d_other_swapped, _ = model_gradient(tau, (gm, gp), "-")
            assert d_other == d_other_swapped


class TestModelMOptimal:
    def test_normalized_at_zero(self):
        assert model_m_optimal(0.0, RatePair(1.0, 3.0), 0.05, "+") == 1.0

    def test_symmetric_rates_zero_eta(self):
        tau, g = 0.7, 2.0
        want = np.exp(-2.0 * g * tau) * np.cosh(g * tau)
        assert np.isclose(model_m_optimal(tau, RatePair(g, g), 0.0, "+"), want, atol=1e-15)
        assert np.isclose(model_m_optimal(tau, RatePair(g, g), 0.0, "-"), want, atol=1e-15)

    def test_exchange_symmetry(self):
        r = RatePair(1.0, 3.0)
        assert model_m_optimal(0.5, r, 0.05, "+") == model_m_optimal(0.5, r.swapped(), 0.05, "-")

    def test_rejects_degenerate_eta(self):
        with pytest.raises(ValueError):
            model_m_optimal(0.5, RatePair(1.0, 3.0), 0.5, "+")
        with pytest.raises(ValueError):
            model_m_optimal(0.5, RatePair(1.0, 3.0), -0.01, "+")

    def test_rejects_bad_branch(self):
        with pytest.raises(ValueError):
            model_m(0.5, RatePair(1.0, 3.0), "x")
