import math

import numpy as np
import pytest

from slsid.analysis import (
    BoundReport,
    OutOfRegimeError,
    RobustPerturbation,
    SampledResponse,
    SmallGainViolation,
    StabilityVerdict,
    certify_stabilization,
    closed_loop_cost,
    closed_loop_cost_cert,
    feasibility_certificate,
    general_robust_transform,
    lft_closed_loop_cost,
    make_bound_report,
    perturbation_fir,
    proposition_bound,
    sampled_sls_residual,
    sherman_morrison_response,
    simulate_closed_loop,
    theorem_bound,
    undermodeled_bound,
)
from slsid.fir import FirMimo, FrequencyGrid, default_grid, hinf_norm_grid
from slsid.plant import PlantKind, build_disturbance_rejection, build_plant
from slsid.synthesis import controller_frequency_response, nominal_synthesis
from slsid.sysid import error_bound_analytic

from conftest import random_feasible_response

DR = PlantKind.DISTURBANCE_REJECTION


@pytest.fixture(scope="module")
def theta0_r4(plant_r4):
    theta0, J_opt = nominal_synthesis(plant_r4, T=16)
    return theta0, J_opt


def small_delta(theta, rng, margin=0.5):
    n = theta.n
    direction = rng.standard_normal(n)
    scale = margin / (hinf_norm_grid(theta.N) + 1e-12)
    return direction * scale / np.linalg.norm(direction)


class TestGeneralTransform:
    def test_zero_perturbation_is_identity(self, rand_theta_r4):
        theta = rand_theta_r4
        grid = default_grid(theta.horizon)
        pert = RobustPerturbation(
            delta1=FirMimo.zero(theta.n, theta.n),
            delta2=FirMimo.zero(1, theta.n),
        )
        hat = general_robust_transform(theta, pert, grid)
        stacked = theta.freq(grid)
        assert np.abs(hat.stacked() - stacked).max() <= 1e-12

    def test_matches_rank_one_closed_form(self, rand_theta_r4, rng):
        theta = rand_theta_r4
        grid = default_grid(theta.horizon)
        delta = small_delta(theta, rng)
        hat_sm = sherman_morrison_response(theta, delta, grid)
        hat_gen = general_robust_transform(
            theta, RobustPerturbation.rank_one(theta, delta), grid
        )
        assert np.abs(hat_sm.stacked() - hat_gen.stacked()).max() <= 1e-10

    def test_transformed_response_is_achievable_on_true_plant(
        self, rand_theta_r4, unit_plant_taps, rng
    ):
        # the linear-transformation argument: a response feasible for the
        # estimate maps onto one feasible for the perturbed plant
        theta = rand_theta_r4
        grid = default_grid(theta.horizon)
        delta = small_delta(theta, rng)
        hat = sherman_morrison_response(theta, delta, grid)
        true_plant = build_disturbance_rejection(unit_plant_taps[1:] + delta, 1.0)
        assert sampled_sls_residual(hat, true_plant.control_rescaled()) <= 1e-6


class TestShermanMorrison:
    def test_zero_delta(self, rand_theta_r4):
        theta = rand_theta_r4
        grid = default_grid(theta.horizon)
        hat = sherman_morrison_response(theta, np.zeros(theta.n), grid)
        assert np.abs(hat.stacked() - theta.freq(grid)).max() <= 1e-14

    def test_small_gain_precondition(self, rand_theta_r4):
        theta = rand_theta_r4
        big = np.ones(theta.n) * 10.0 / max(hinf_norm_grid(theta.N), 1e-9)
        with pytest.raises(SmallGainViolation):
            sherman_morrison_response(theta, big, default_grid(theta.horizon))

    def test_linearization_near_zero(self, rand_theta_r4, rng):
        theta = rand_theta_r4
        grid = default_grid(theta.horizon)
        delta = rng.standard_normal(theta.n)
        delta *= 1e-6 / np.linalg.norm(delta)
        hat = sherman_morrison_response(theta, delta, grid)
        assert np.abs(hat.stacked() - theta.freq(grid)).max() <= 1e-4


class TestClosedLoopCost:
    def test_zero_plant_zero_cost(self):
        plant = build_disturbance_rejection([0.0], 1.0)
        theta, _ = nominal_synthesis(plant, T=6)
        assert closed_loop_cost(np.zeros(1), theta, DR, 1.0) <= 1e-7

    def test_three_evaluation_routes_agree(self, rand_theta_r4, unit_plant_taps, rng):
        theta = rand_theta_r4
        g_hat = unit_plant_taps[1:]
        grid = default_grid(theta.horizon)
        for _ in range(3):
            delta = small_delta(theta, rng)
            g_true = g_hat + delta
            hat_sm = sherman_morrison_response(theta, delta, grid)
            hat_gen = general_robust_transform(
                theta, RobustPerturbation.rank_one(theta, delta), grid
            )
            J_sm = closed_loop_cost(g_true, hat_sm, DR, 1.0)
            J_gen = closed_loop_cost(g_true, hat_gen, DR, 1.0)
            K = controller_frequency_response(theta, grid)
            J_lft = lft_closed_loop_cost(g_true, K, DR, 1.0, grid)
            assert abs(J_sm - J_gen) <= 1e-6
            assert abs(J_sm - J_lft) <= 1e-6
            assert abs(J_gen - J_lft) <= 1e-6

    def test_certificate_attached(self, rand_theta_r4, unit_plant_taps, rng):
        theta = rand_theta_r4
        delta = small_delta(theta, rng)
        hat = sherman_morrison_response(theta, delta, default_grid(theta.horizon))
        J, cert = closed_loop_cost_cert(unit_plant_taps[1:] + delta, hat, DR, 1.0)
        assert math.isfinite(cert) and cert >= 0.0


class TestCertifyStabilization:
    def test_zero_delta_stable(self, rand_theta_r4):
        verdict = certify_stabilization(rand_theta_r4, np.zeros(rand_theta_r4.n))
        assert verdict is StabilityVerdict.CERTIFIED_STABLE

    def test_half_margin_stable(self, rand_theta_r4, rng):
        delta = small_delta(rand_theta_r4, rng, margin=0.5)
        assert (
            certify_stabilization(rand_theta_r4, delta)
            is StabilityVerdict.CERTIFIED_STABLE
        )

    def test_constructed_root_outside_circle(self, rand_theta_r4):
        theta = rand_theta_r4
        Nv = theta.N.eval_at(1.1)[:, 0]
        delta = Nv / (Nv @ Nv)  # places a zero of 1 - delta^T N at z = 1.1
        f = perturbation_fir(theta, delta)
        assert abs(f.eval_at(1.1)) <= 1e-12
        assert (
            certify_stabilization(theta, delta)
            is StabilityVerdict.CERTIFIED_UNSTABLE
        )


class TestBounds:
    def test_proposition_zero_radius(self, theta0_r4, plant_r4):
        assert proposition_bound(0.0, theta0_r4[0], plant_r4) == 0.0

    def test_proposition_quarter_point_identity(self, theta0_r4, plant_r4):
        # at eps = 1/(4||N0||) the prefactor collapses to 1/||N0||
        from slsid.synthesis import response_norms

        theta0, _ = theta0_r4
        norms = response_norms(theta0, plant_r4.control_rescaled())
        eps = 0.25 / norms["norm_N"]
        bound = proposition_bound(eps, theta0, plant_r4)
        direct = norms["norm_stack"] * norms["norm_RB_ND"] / norms["norm_N"]
        assert bound == pytest.approx(direct, rel=1e-9)

    def test_proposition_regime_guard(self, theta0_r4, plant_r4):
        from slsid.synthesis import response_norms

        theta0, _ = theta0_r4
        norms = response_norms(theta0, plant_r4.control_rescaled())
        with pytest.raises(OutOfRegimeError):
            proposition_bound(0.6 / norms["norm_N"], theta0, plant_r4)

    def test_theorem_zero_noise(self, theta0_r4, plant_r4):
        assert theorem_bound(0.0, 4, 100, 2, 0.1, theta0_r4[0], plant_r4) == 0.0

    def test_theorem_m_scaling(self, theta0_r4, plant_r4):
        a = theorem_bound(0.1, 4, 50, 2, 0.1, theta0_r4[0], plant_r4)
        b = theorem_bound(0.1, 4, 200, 2, 0.1, theta0_r4[0], plant_r4)
        assert a == pytest.approx(2 * b, rel=1e-9)

    def test_theorem_dominates_proposition_at_analytic_radius(
        self, theta0_r4, plant_r4
    ):
        from slsid.synthesis import response_norms

        theta0, _ = theta0_r4
        norms = response_norms(theta0, plant_r4.control_rescaled())
        sigma, r, eta = 0.1, 4, 0.1
        for m in (50, 200, 800):
            eps = error_bound_analytic(sigma, r, m, 2, eta)
            if eps >= 0.25 / norms["norm_N"]:
                continue
            assert theorem_bound(sigma, r, m, 2, eta, theta0, plant_r4) >= (
                proposition_bound(eps, theta0, plant_r4)
            )

    def test_theorem_regime_warning(self, theta0_r4, plant_r4):
        with pytest.warns(RuntimeWarning):
            theorem_bound(10.0, 4, 2, 2, 0.1, theta0_r4[0], plant_r4)

    def test_undermodeled_reduces_without_tail(self, theta0_r4, plant_r4):
        theta0, _ = theta0_r4
        thm = theorem_bound(0.1, 6, 100, 2, 0.1, theta0, plant_r4)
        under = undermodeled_bound(0.1, 6, 4, 100, 2, 0.1, 0.0, theta0, plant_r4)
        assert under == pytest.approx(thm, rel=1e-12)

    def test_undermodeled_large_m_limit(self, theta0_r4, plant_r4):
        from slsid.synthesis import response_norms

        theta0, _ = theta0_r4
        norms = response_norms(theta0, plant_r4.control_rescaled())
        tail = 0.1 / norms["norm_N"]
        limit = 4.0 * tail * norms["norm_RB_ND"]
        at_huge_m = undermodeled_bound(
            0.1, 6, 4, 10**14, 2, 0.1, tail, theta0, plant_r4
        )
        assert at_huge_m == pytest.approx(limit, rel=1e-5)
        assert at_huge_m >= limit  # the floor is approached from above

    def test_undermodeled_regime_guard(self, theta0_r4, plant_r4):
        from slsid.synthesis import response_norms

        theta0, _ = theta0_r4
        norms = response_norms(theta0, plant_r4.control_rescaled())
        with pytest.raises(OutOfRegimeError):
            undermodeled_bound(
                0.1, 6, 4, 100, 2, 0.1, 0.3 / norms["norm_N"], theta0, plant_r4
            )

    def test_bound_report_fields(self, theta0_r4, plant_r4, rng):
        theta0, J_opt = theta0_r4
        report = make_bound_report(
            theta0, plant_r4, eps=0.05, delta=np.zeros(3),
            J_hat=J_opt + 0.01, J_opt=J_opt,
            sigma=0.1, r=4, m=100, p=2, eta=0.1, theta_star=theta0,
        )
        assert isinstance(report, BoundReport)
        assert report.actual_gap == pytest.approx(0.01)
        assert 0.0 < report.small_gain_margin <= 1.0


class TestFeasibilityCertificate:
    def test_zero_delta(self, theta0_r4, plant_r4):
        from slsid.synthesis import response_norms

        theta0, _ = theta0_r4
        hat0, alpha0 = feasibility_certificate(
            theta0, plant_r4, plant_r4.g.copy(), eps=0.0
        )
        norms = response_norms(theta0, plant_r4.control_rescaled())
        assert alpha0 == pytest.approx(norms["norm_stack"], rel=1e-12)
        grid = default_grid(theta0.horizon)
        assert np.abs(hat0.stacked() - theta0.freq(grid)).max() <= 1e-12

    def test_certificate_is_feasible_for_guaranteed_cost(
        self, theta0_r4, plant_r4, rng
    ):
        theta0, _ = theta0_r4
        g = plant_r4.g
        norm_N0 = hinf_norm_grid(theta0.N)
        eps = 0.2 / norm_N0
        delta = rng.standard_normal(3)
        delta *= 0.8 * eps / np.linalg.norm(delta)
        g_hat = g - delta
        hat0, alpha0 = feasibility_certificate(theta0, plant_r4, g_hat, eps)
        # substituted into the robust feasibility constraint
        eN = eps * np.abs(np.linalg.svd(hat0.N, compute_uv=False)[:, 0]).max()
        stack = np.concatenate(
            [1.0 + np.einsum("j,tjk->tk", g_hat, hat0.N), hat0.L[:, 0, :]], axis=1
        )
        stack_norm = np.linalg.norm(stack, axis=1).max()
        assert eN * alpha0 + stack_norm <= alpha0 + 1e-6

    def test_radius_mismatch_rejected(self, theta0_r4, plant_r4):
        theta0, _ = theta0_r4
        with pytest.raises(ValueError):
            feasibility_certificate(
                theta0, plant_r4, plant_r4.g + 1.0, eps=1e-6
            )


class TestTimeDomain:
    def test_stable_loop_decays(self, robust_r4, unit_plant_taps, rng):
        g_hat = unit_plant_taps[1:] * 0.97 + 0.01
        delta = small_delta(robust_r4.theta, rng, margin=0.4)
        z = simulate_closed_loop(g_hat + delta, robust_r4.theta, DR, 1.0)
        half = len(z) // 2
        assert np.abs(z[half:]).max() <= 1e-6
        assert np.abs(z).max() > 1e-3  # the loop actually responded

    def test_unstable_loop_grows(self, robust_r4, unit_plant_taps):
        theta = robust_r4.theta
        Nv = theta.N.eval_at(1.1)[:, 0]
        delta = Nv / (Nv @ Nv)
        g_hat = unit_plant_taps[1:] * 0.97 + 0.01
        z = simulate_closed_loop(g_hat + delta, theta, DR, 1.0)
        half = len(z) // 2
        first = np.abs(z[:half]).max()
        assert np.abs(z[half:]).max() >= 10.0 * first

    def test_matches_frequency_domain_impulse(self, robust_r4, unit_plant_taps):
        # closed-loop map sampled in frequency vs simulated impulse response
        g_hat = unit_plant_taps[1:] * 0.97 + 0.01
        theta = robust_r4.theta
        n_steps = 512
        z = simulate_closed_loop(g_hat, theta, DR, 1.0, n_steps=n_steps, channel=0)
        grid = FrequencyGrid(n_steps)
        from slsid.synthesis import closed_loop_fir

        plant = build_disturbance_rejection(g_hat, 1.0).control_rescaled()
        W = closed_loop_fir(theta, plant).freq(grid)
        impulse_freq = np.fft.ifft(W[:, 0, 0]).real
        assert np.abs(impulse_freq[: n_steps // 2] - z[: n_steps // 2, 0]).max() <= 1e-8
