import math

import numpy as np
import pytest

import GSDM.diffusion
from GSDM.exceptions import PreconditionError
from GSDM.oracles import (
    REPORT_COLUMNS,
    analytic_gaussian_score,
    check_covariance_kernel,
    check_forward_consistency,
    check_gradients,
    check_trained_gaussian_score,
    familywise_z,
    finite_difference_gradient,
    gaussian_log_density,
    gaussian_spectrum_dataset,
    mc_covariance,
    run_verification_suite,
)
from GSDM.schedules import NoiseSchedule


def test_covariance_kernel_matches_monte_carlo():
    report = check_covariance_kernel(seed=0, n_samples=50_000, n_bases=2, n_tuples=8)
    assert report.passed, report


def test_wrong_time_covariance_is_caught(monkeypatch):
    monkeypatch.setattr(GSDM.diffusion, "_time_covariance", lambda s, t: s * t)
    report = check_covariance_kernel(seed=0, n_samples=50_000, n_bases=2, n_tuples=8)
    assert not report.passed


def test_mc_covariance_on_identity_basis():
    estimate, se = mc_covariance(np.eye(3), 0.4, 0.9, (1, 1, 1, 1), 40_000, np.random.default_rng(0))
    assert abs(estimate - 0.4) < 4 * se
    assert se > 0


def test_mc_covariance_needs_samples():
    with pytest.raises(PreconditionError):
        mc_covariance(np.eye(2), 0.5, 0.5, (0, 0, 0, 0), 10, np.random.default_rng(0))


def test_familywise_threshold():
    assert familywise_z(1) == pytest.approx(3.0)
    assert familywise_z(80) > 3.0


def test_forward_simulation_agrees_with_closed_form():
    reports = check_forward_consistency(seed=0, trajectories=2_000, n_steps=200)
    assert len(reports) == 7
    assert all(r.passed for r in reports), [(r.check, r.measured) for r in reports]


def test_gradient_exactness():
    assert check_gradients(seed=0, configs=3).passed


def test_gaussian_spectrum_dataset():
    records = gaussian_spectrum_dataset(seed=1, count=200, n=5, mu=2.0, s0=0.5)
    lam = np.concatenate([r.spectrum.lam for r in records])
    assert all(r.graph.weighted and r.graph.d == 0 for r in records)
    assert abs(lam.mean() - 2.0) < 0.05
    assert abs(lam.std() - 0.5) < 0.05


@pytest.mark.slow
def test_trained_score_matches_gaussian_score():
    report = check_trained_gaussian_score(seed=0)
    assert report.check == "trained_gaussian_score"
    assert report.passed, report.measured


class TestAnalyticScore:
    def test_reduces_to_conditional_score(self):
        schedule = NoiseSchedule()
        x = np.array([0.5, -0.2])
        stats = schedule.marginal(0.4)
        expected = -(x - stats.mean_coef * 1.0) / stats.std ** 2
        np.testing.assert_allclose(analytic_gaussian_score(x, 0.4, 1.0, 0.0, schedule), expected, rtol=1e-14)

    def test_is_gradient_of_log_density(self):
        schedule = NoiseSchedule(family="cosine")
        x = np.array([0.3, 1.7, -2.0])
        fd = finite_difference_gradient(lambda v: gaussian_log_density(v, 0.6, 2.0, 0.5, schedule), x)
        np.testing.assert_allclose(analytic_gaussian_score(x, 0.6, 2.0, 0.5, schedule), fd, rtol=1e-6)

    def test_undefined_for_point_mass_at_time_zero(self):
        with pytest.raises(PreconditionError):
            analytic_gaussian_score(np.ones(2), 0.0, 1.0, 0.0, NoiseSchedule())

    def test_standard_normal_density(self):
        schedule = NoiseSchedule()
        value = gaussian_log_density(np.zeros(1), 0.0, 0.0, 1.0, schedule)
        assert value == pytest.approx(-0.5 * math.log(2.0 * math.pi))


@pytest.mark.slow
def test_quick_verification_suite_passes():
    report = run_verification_suite(seed=0, quick=True)
    assert list(report.columns) == REPORT_COLUMNS
    assert report["passed"].all(), report[~report["passed"]]
