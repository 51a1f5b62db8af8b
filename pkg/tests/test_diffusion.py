import math

import numpy as np
import pytest

from GSDM.datasets import random_orthonormal
from GSDM.diffusion import (
    DiffusionState,
    KernelIndex,
    conditional_score,
    covariance_kernel,
    perturb,
    project_to_eigenbasis,
    sample_M,
    simulate_forward_em,
)
from GSDM.exceptions import PreconditionError
from GSDM.oracles import finite_difference_gradient
from GSDM.schedules import NoiseSchedule


class TestPerturb:
    def test_time_zero_returns_input(self, rng):
        x0 = rng.standard_normal(7)
        x_t, _ = perturb(x0, 0.0, NoiseSchedule(), rng)
        np.testing.assert_array_equal(x_t, x0)

    def test_returns_the_noise_used(self, rng):
        schedule = NoiseSchedule(family="cosine")
        x0 = rng.standard_normal((3, 4))
        x_t, eps = perturb(x0, 0.4, schedule, rng)
        stats = schedule.marginal(0.4)
        np.testing.assert_allclose(x_t, stats.mean_coef * x0 + stats.std * eps, rtol=0, atol=1e-15)

    def test_terminal_mean(self):
        n = 100_000
        schedule = NoiseSchedule()
        x_t, _ = perturb(np.ones(n), 1.0, schedule, np.random.default_rng(0))
        stats = schedule.marginal(1.0)
        assert stats.mean_coef == pytest.approx(6.56e-3, abs=1e-5)
        assert abs(x_t.mean() - stats.mean_coef) < 3 * stats.std / math.sqrt(n)

    def test_variance_at_half(self):
        n = 100_000
        schedule = NoiseSchedule()
        x_t, _ = perturb(np.zeros(n), 0.5, schedule, np.random.default_rng(1))
        var = schedule.marginal(0.5).std ** 2
        assert abs(x_t.var(ddof=1) - var) < 3 * var * math.sqrt(2.0 / (n - 1))

    @pytest.mark.parametrize("t", [-0.1, 1.5, float("nan")])
    def test_rejects_time_outside_domain(self, t, rng):
        with pytest.raises(PreconditionError):
            perturb(np.ones(3), t, NoiseSchedule(), rng)

    def test_rejects_non_finite_signal(self, rng):
        with pytest.raises(PreconditionError):
            perturb(np.array([1.0, np.inf]), 0.5, NoiseSchedule(), rng)


class TestConditionalScore:
    def test_zero_at_mode(self):
        schedule = NoiseSchedule()
        x0 = np.array([0.3, -1.2, 2.0])
        mode = schedule.marginal(0.3).mean_coef * x0
        np.testing.assert_allclose(conditional_score(mode, x0, 0.3, schedule), 0.0, atol=1e-15)

    def test_equals_minus_eps_over_std(self, rng):
        schedule = NoiseSchedule(family="sigmoid")
        x0 = rng.standard_normal(5)
        x_t, eps = perturb(x0, 0.6, schedule, rng)
        expected = -eps / schedule.marginal(0.6).std
        np.testing.assert_allclose(conditional_score(x_t, x0, 0.6, schedule), expected, rtol=1e-10)

    @pytest.mark.parametrize("kind", ["vp", "ve"])
    def test_matches_finite_difference(self, kind, rng):
        schedule = NoiseSchedule(kind=kind)
        t = 0.35
        x0 = rng.standard_normal(4)
        x_t = perturb(x0, t, schedule, rng)[0]
        stats = schedule.marginal(t)

        def log_density(x):
            return float(np.sum(-0.5 * (x - stats.mean_coef * x0) ** 2 / stats.std ** 2))

        fd = finite_difference_gradient(log_density, x_t, h=1e-5)
        score = conditional_score(x_t, x0, t, schedule)
        assert np.max(np.abs(score - fd) / (np.abs(fd) + 1e-12)) < 1e-5

    def test_linear_in_displacement(self):
        schedule = NoiseSchedule()
        x0 = np.zeros(3)
        base = conditional_score(np.array([0.1, 0.2, -0.3]), x0, 0.5, schedule)
        doubled = conditional_score(np.array([0.2, 0.4, -0.6]), x0, 0.5, schedule)
        np.testing.assert_allclose(doubled, 2.0 * base, rtol=1e-14)

    def test_undefined_at_time_zero(self):
        with pytest.raises(PreconditionError):
            conditional_score(np.ones(2), np.ones(2), 0.0, NoiseSchedule())

    def test_shape_mismatch(self):
        with pytest.raises(PreconditionError):
            conditional_score(np.ones(2), np.ones(3), 0.5, NoiseSchedule())


class TestForwardEM:
    def test_noiseless_constant_beta_decay(self):
        constant = NoiseSchedule(beta_min=2.0, beta_max=2.0)
        x = simulate_forward_em(np.ones(3), constant, 1000, np.random.default_rng(0), stochastic=False)
        np.testing.assert_allclose(x, math.exp(-1.0), atol=1e-3)

    def test_weak_error_shrinks_with_steps(self):
        schedule = NoiseSchedule(family="cosine")
        exact = schedule.marginal(1.0).mean_coef
        gaps = [
            abs(simulate_forward_em(np.ones(1), schedule, steps, np.random.default_rng(0), stochastic=False)[0] - exact)
            for steps in (25, 50, 100, 200, 400)
        ]
        assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))

    @pytest.mark.parametrize("kind", ["vp", "ve"])
    def test_marginal_moments_match_closed_form(self, kind):
        schedule = NoiseSchedule(kind=kind)
        n = 10_000
        x = simulate_forward_em(np.ones(n), schedule, 500, np.random.default_rng(2), t_end=0.5)
        stats = schedule.marginal(0.5)
        var = stats.std ** 2
        assert abs(x.mean() - stats.mean_coef) < 4 * stats.std / math.sqrt(n)
        assert abs(x.var(ddof=1) - var) < 4 * var * math.sqrt(2.0 / (n - 1))

    def test_rejects_zero_steps(self):
        with pytest.raises(PreconditionError):
            simulate_forward_em(np.ones(2), NoiseSchedule(), 0, np.random.default_rng(0))


class TestCovarianceKernel:
    def test_identity_basis(self):
        U0 = np.eye(3)
        assert covariance_kernel(U0, KernelIndex(1, 1, 1, 1, 0.3, 0.7)) == pytest.approx(0.3)
        assert covariance_kernel(U0, KernelIndex(1, 1, 2, 2, 0.3, 0.7)) == 0.0
        assert covariance_kernel(U0, KernelIndex(0, 1, 0, 1, 0.5, 0.5)) == 0.0

    def test_symmetries(self, rng):
        U0 = random_orthonormal(4, rng)
        base = covariance_kernel(U0, KernelIndex(0, 1, 2, 3, 0.6, 0.6))
        assert covariance_kernel(U0, KernelIndex(1, 0, 2, 3, 0.6, 0.6)) == pytest.approx(base, abs=1e-15)
        assert covariance_kernel(U0, KernelIndex(2, 3, 0, 1, 0.6, 0.6)) == pytest.approx(base, abs=1e-15)

    def test_index_out_of_range(self):
        with pytest.raises(PreconditionError):
            covariance_kernel(np.eye(3), KernelIndex(0, 0, 3, 0, 0.5, 0.5))

    def test_rejects_non_orthonormal_basis(self):
        with pytest.raises(PreconditionError):
            covariance_kernel(2.0 * np.eye(3), KernelIndex(0, 0, 0, 0, 0.5, 0.5))


class TestSampleM:
    def test_time_zero_is_zero(self, rng):
        np.testing.assert_array_equal(sample_M(random_orthonormal(4, rng), 0.0, rng), np.zeros((4, 4)))

    def test_symmetric(self, rng):
        M = sample_M(random_orthonormal(6, rng), 0.8, rng)
        assert np.max(np.abs(M - M.T)) <= 1e-12

    def test_entry_variance_matches_kernel(self):
        rng = np.random.default_rng(5)
        U0 = random_orthonormal(3, rng)
        n = 100_000
        draws = sample_M(U0, 1.0, rng, size=n)
        for i, j in [(0, 0), (0, 1), (1, 2)]:
            expected = covariance_kernel(U0, KernelIndex(i, j, i, j, 1.0, 1.0))
            values = draws[:, i, j]
            assert abs(values.var(ddof=1) - expected) < 3 * expected * math.sqrt(2.0 / (n - 1))

    def test_draws_live_in_eigenbasis(self, rng):
        U0 = random_orthonormal(5, rng)
        M = sample_M(U0, 0.7, rng)
        assert np.max(np.abs(project_to_eigenbasis(M, U0) - M)) < 1e-10

    def test_negative_time(self):
        with pytest.raises(PreconditionError):
            sample_M(np.eye(2), -0.1, np.random.default_rng(0))


def test_diffusion_state_validation():
    DiffusionState(X_t=np.zeros((3, 1)), Lambda_t=np.zeros(3), t=0.5)
    with pytest.raises(PreconditionError):
        DiffusionState(X_t=np.zeros((3, 1)), Lambda_t=np.zeros(3), t=1.5)
    with pytest.raises(PreconditionError):
        DiffusionState(X_t=np.zeros((2, 1)), Lambda_t=np.zeros(3), t=0.5)
