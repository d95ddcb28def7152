import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slsid.fir import FirSiso
from slsid.rng import make_rng
from slsid.sysid import (
    IdentConfig,
    IllPosedDesignError,
    RadiusMethod,
    covariance_S,
    design_inputs,
    effective_variance,
    error_bound_analytic,
    error_bound_simulated,
    identify,
    least_squares_estimate,
    simulate_experiment,
)


class TestDesignInputs:
    def test_l2_ball_gives_impulses(self):
        inputs = design_inputs(IdentConfig(m=3, T=4, p=2))
        assert inputs.shape == (3, 4)
        assert np.array_equal(inputs, np.tile([1, 0, 0, 0], (3, 1)))

    def test_linf_ball_gives_signs(self):
        inputs = design_inputs(IdentConfig(m=5, T=4, p=np.inf, seed=3))
        assert inputs.shape == (5, 4)
        assert np.all(np.abs(inputs) == 1.0)
        assert np.max(np.abs(inputs), axis=1).tolist() == [1.0] * 5

    def test_impulse_design_trace(self):
        # impulses make the Gram matrix m*I, so Tr(S) = r/m exactly
        m, r = 7, 5
        inputs = design_inputs(IdentConfig(m=m, T=r, p=2))
        S = covariance_S(inputs, r)
        assert np.allclose(S, np.eye(r) / m)
        assert np.trace(S) == pytest.approx(r / m, abs=1e-12)

    def test_sign_design_trace_near_rate(self):
        # empirical check of the l_inf-ball rate constant 4*log2*r^{2/p}/m
        m, r = 40, 6
        inputs = design_inputs(IdentConfig(m=m, T=r, p=np.inf, seed=1))
        S = covariance_S(inputs, r)
        assert np.trace(S) <= 4.0 * math.log(2.0) * 1.0 / m * r  # loose sanity cap


class TestSimulateExperiment:
    def test_noiseless_impulse(self):
        y = simulate_experiment(FirSiso([0, 1]), [1, 0, 0, 0], 0.0, make_rng(0))
        assert np.array_equal(y, [0, 1, 0, 0])

    def test_hand_convolution(self):
        y = simulate_experiment(
            FirSiso([0, 1, 2]), [1, 1, 0, 0, 0], 0.0, make_rng(0)
        )
        assert np.array_equal(y, [0, 1, 3, 2, 0])

    def test_noise_mean(self):
        rng = make_rng(5)
        T, n_trials = 4, 100_000
        acc = np.zeros(T)
        noise = rng.standard_normal((n_trials, T))
        acc = noise.mean(axis=0)  # sigma=1, zero plant: y is pure noise
        assert np.abs(acc).max() <= 0.02


class TestLeastSquares:
    def test_exact_recovery_noiseless(self):
        g = FirSiso([0, 1, 2, 0])
        inputs = design_inputs(IdentConfig(m=2, T=4, p=2))
        outputs = np.array(
            [simulate_experiment(g, u, 0.0, make_rng(0)) for u in inputs]
        )
        assert np.allclose(least_squares_estimate(inputs, outputs, 4), g.taps)

    def test_impulse_design_reduces_to_mean(self):
        rng = make_rng(7)
        g = FirSiso([0, 0.5, -0.2])
        inputs = design_inputs(IdentConfig(m=6, T=3, p=2))
        outputs = np.array(
            [simulate_experiment(g, u, 0.3, rng) for u in inputs]
        )
        est = least_squares_estimate(inputs, outputs, 3)
        assert np.allclose(est, outputs.mean(axis=0), atol=1e-12)

    def test_sign_input_triangular_recovery(self):
        rng = make_rng(9)
        g = FirSiso(np.concatenate([[0.0], rng.uniform(-1, 1, 5)]))
        u = rng.integers(0, 2, 6) * 2.0 - 1.0
        y = simulate_experiment(g, u, 0.0, rng)
        est = least_squares_estimate(u[None, :], y[None, :], 6)
        assert np.abs(est - g.taps).max() <= 1e-10

    def test_singular_design_rejected(self):
        with pytest.raises(IllPosedDesignError):
            least_squares_estimate(np.zeros((2, 3)), np.zeros((2, 3)), 3)

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_residual_orthogonality(self, seed):
        r = np.random.default_rng(seed)
        T, m = 5, 3
        inputs = r.integers(0, 2, (m, T)) * 2.0 - 1.0
        outputs = r.standard_normal((m, T))
        try:
            est = least_squares_estimate(inputs, outputs, T)
        except IllPosedDesignError:
            return
        from slsid.fir import toeplitz

        resid = np.zeros(T)
        for u, y in zip(inputs, outputs):
            Z = toeplitz(u)
            resid += Z.T @ (y - Z @ est)
        assert np.abs(resid).max() <= 1e-8


class TestCovariance:
    def test_input_scaling(self, rng):
        inputs = rng.standard_normal((4, 5))
        S1 = covariance_S(inputs, 4)
        S2 = covariance_S(3.0 * inputs, 4)
        assert np.allclose(S2, S1 / 9.0)

    def test_empirical_covariance_matches(self):
        # delta = g - g_hat ~ N(0, sigma^2 S); impulse design, vectorized OLS
        m, r, sigma, n_trials = 5, 4, 0.5, 10_000
        rng = make_rng(11)
        S = np.eye(r) / m
        deltas = -sigma * rng.standard_normal((n_trials, m, r)).mean(axis=1)
        emp = deltas.T @ deltas / n_trials
        target = sigma**2 * S
        se = np.sqrt(
            (np.outer(np.diag(target), np.diag(target)) + target**2) / n_trials
        )
        assert np.all(np.abs(emp - target) <= 5.0 * se)


class TestErrorBounds:
    def test_noiseless_radius_zero(self):
        assert error_bound_analytic(0.0, 4, 10, 2, 0.05) == 0.0
        assert error_bound_simulated(np.eye(3), 0.0, 0.05, 10_000, make_rng(0)) == 0.0

    def test_formula_value(self):
        # 2 sigma sqrt(r/m) (1 + sqrt(2 log(1/eta) / r)) at the worked numbers
        expected = 2 * 0.1 * math.sqrt(4 / 100) * (1 + math.sqrt(2 * math.log(20) / 4))
        assert error_bound_analytic(0.1, 4, 100, 2, 0.05) == pytest.approx(
            expected, rel=1e-12
        )

    def test_quadrupling_m_halves(self):
        a = error_bound_analytic(0.2, 6, 25, 2, 0.1)
        b = error_bound_analytic(0.2, 6, 100, 2, 0.1)
        assert a == pytest.approx(2 * b, rel=1e-12)

    def test_monotonicity(self):
        base = error_bound_analytic(0.1, 4, 30, 4, 0.1)
        assert error_bound_analytic(0.1, 4, 60, 4, 0.1) < base
        assert error_bound_analytic(0.2, 4, 30, 4, 0.1) > base
        assert error_bound_analytic(0.1, 8, 30, 4, 0.1) > base
        # for p = inf the r-dependence degenerates to a constant factor
        assert error_bound_analytic(0.1, 8, 30, np.inf, 0.1) >= error_bound_analytic(
            0.1, 4, 30, np.inf, 0.1
        )

    def test_simulated_below_analytic_on_impulse_design(self):
        sigma, r, eta = 0.1, 8, 0.05
        for m in (15, 20, 25, 30):
            S = np.eye(r) / m
            sim = error_bound_simulated(S, sigma, eta, 100_000, make_rng(m))
            ana = error_bound_analytic(sigma, r, m, 2, eta)
            assert sim <= ana

    def test_simulated_coverage(self):
        sigma, r, m, eta = 0.1, 4, 10, 0.1
        S = np.eye(r) / m
        eps = error_bound_simulated(S, sigma, eta, 50_000, make_rng(2))
        fresh = make_rng(3).standard_normal((10_000, r)) * (sigma / math.sqrt(m))
        coverage = np.mean(np.linalg.norm(fresh, axis=1) <= eps)
        assert coverage >= 1.0 - eta

    def test_insufficient_samples(self):
        with pytest.raises(ValueError):
            error_bound_simulated(np.eye(2), 1.0, 1e-4, 1000, make_rng(0))

    def test_eta_domain(self):
        with pytest.raises(ValueError):
            error_bound_analytic(0.1, 4, 10, 2, 1.5)


class TestEffectiveVariance:
    def test_no_process_noise(self):
        assert effective_variance(0.0, 0.3, FirSiso([0, 1])) == pytest.approx(0.09)

    def test_allpass(self):
        assert effective_variance(1.0, 1.0, FirSiso([0, 1])) == pytest.approx(
            2.0, abs=1e-9
        )

    def test_dominates_measurement_noise(self, rng):
        g = FirSiso(np.concatenate([[0], rng.uniform(-1, 1, 4)]))
        assert effective_variance(0.5, 0.3, g) >= 0.09


class TestIdentify:
    def test_noiseless_exact(self):
        g = FirSiso([0, 0.4, -0.3, 0.1])
        res = identify(g, IdentConfig(m=4, T=4, sigma=0.0, seed=1), eta=0.1)
        assert np.allclose(res.g_hat, g.taps)
        assert res.eps == 0.0

    def test_radius_covers_realized_error_typically(self):
        g = FirSiso([0, 0.4, -0.3, 0.1])
        hits = 0
        for seed in range(20):
            res = identify(
                g,
                IdentConfig(m=25, T=4, sigma=0.1, seed=seed),
                eta=0.1,
                method=RadiusMethod.ANALYTIC,
            )
            hits += np.linalg.norm(g.taps - res.g_hat) <= res.eps
        assert hits >= 18

    def test_deterministic(self):
        g = FirSiso([0, 0.4, -0.3])
        a = identify(g, IdentConfig(m=10, T=3, sigma=0.2, seed=5), eta=0.1)
        b = identify(g, IdentConfig(m=10, T=3, sigma=0.2, seed=5), eta=0.1)
        assert np.array_equal(a.g_hat, b.g_hat) and a.eps == b.eps
