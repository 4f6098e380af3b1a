from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from sparse_fgam.helpers.statistics import (
    batch_means_se,
    draw_inverse_gamma,
    gaussian_from_precision,
    inverse_gamma_moments,
    sample_gaussian_precision,
    slice_sample_positive,
    spawn_generators,
)


PRECISION = np.array([[2.0, 0.5], [0.5, 1.0]])


def test_spawn_generators_reproducible():
    first = [rng.standard_normal(3) for rng in spawn_generators(42, 2)]
    second = [rng.standard_normal(3) for rng in spawn_generators(42, 2)]
    np.testing.assert_array_equal(first[0], second[0])
    np.testing.assert_array_equal(first[1], second[1])
    assert not np.allclose(first[0], first[1])


def test_gaussian_from_precision():
    rhs = np.array([1.0, -2.0])
    mean, covariance, log_det = gaussian_from_precision(PRECISION, rhs)
    np.testing.assert_allclose(covariance, np.linalg.inv(PRECISION))
    np.testing.assert_allclose(mean, np.linalg.solve(PRECISION, rhs))
    np.testing.assert_allclose(log_det, -np.log(np.linalg.det(PRECISION)))


def test_gaussian_from_precision_empty():
    mean, covariance, log_det = gaussian_from_precision(np.zeros((0, 0)), np.zeros(0))
    assert mean.shape == (0,)
    assert covariance.shape == (0, 0)
    assert log_det == 0.0


def test_gaussian_from_precision_not_positive_definite():
    with pytest.raises(np.linalg.LinAlgError):
        gaussian_from_precision(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2))


def test_sample_gaussian_precision_moments():
    rng = np.random.default_rng(0)
    rhs = np.array([1.0, 0.0])
    draws = np.array([sample_gaussian_precision(rng, PRECISION, rhs)[0] for _ in range(5000)])
    np.testing.assert_allclose(draws.mean(axis=0), np.linalg.solve(PRECISION, rhs), atol=0.06)
    np.testing.assert_allclose(np.cov(draws.T), np.linalg.inv(PRECISION), atol=0.08)


def test_draw_inverse_gamma_mean():
    rng = np.random.default_rng(1)
    draws = np.array([draw_inverse_gamma(rng, 5.0, 8.0) for _ in range(20000)])
    assert np.all(draws > 0)
    np.testing.assert_allclose(draws.mean(), 2.0, rtol=0.03)


@pytest.mark.parametrize(
    "shape, rate",
    [
        (1.0, 0.0),  # zero_rate
        (0.0, 1.0),  # zero_shape
        (1.0, np.inf),  # infinite_rate
    ],
)
def test_draw_inverse_gamma_invalid(shape, rate):
    with pytest.raises(ValueError, match="Invalid inverse-gamma parameters"):
        draw_inverse_gamma(np.random.default_rng(0), shape, rate)


@pytest.mark.parametrize(
    "shape, rate",
    [
        (3.0, 2.0),
        (50.5, 0.7),
    ],
)
def test_inverse_gamma_moments(shape, rate):
    inv_mean, log_mean = inverse_gamma_moments(shape, rate)
    dist = stats.invgamma(a=shape, scale=rate)
    np.testing.assert_allclose(inv_mean, dist.expect(lambda v: 1.0 / v), rtol=1e-6)
    np.testing.assert_allclose(log_mean, dist.expect(np.log), rtol=1e-6, atol=1e-8)


def test_slice_sampler_targets_gamma():
    rng = np.random.default_rng(2)

    def log_density(value):
        return 2.0 * np.log(value) - value if value > 0 else -np.inf

    state, draws = 1.0, []
    for _ in range(4000):
        state, _ = slice_sample_positive(log_density, state, rng)
        draws.append(state)
    draws = np.array(draws[500:])
    assert np.all(draws > 0)
    np.testing.assert_allclose(draws.mean(), 3.0, atol=0.3)
    np.testing.assert_allclose(draws.var(), 3.0, rtol=0.25)


def test_slice_sampler_doubles_for_distant_mass():
    rng = np.random.default_rng(3)

    def log_density(value):
        return -0.5 * (value - 100.0) ** 2 if value > 0 else -np.inf

    state, doublings = slice_sample_positive(log_density, 100.0, rng)
    assert doublings >= 6
    assert 90.0 < state < 110.0


def test_slice_sampler_invalid_start():
    with pytest.raises(ValueError, match="Invalid slice start"):
        slice_sample_positive(lambda value: -np.inf, 1.0, np.random.default_rng(0))


def test_batch_means_se():
    rng = np.random.default_rng(4)
    chain = rng.standard_normal((10000, 2))
    se = batch_means_se(chain)
    assert se.shape == (2,)
    assert np.all((se > 0.005) & (se < 0.02))
    assert batch_means_se(chain[:, 0]).shape == ()
