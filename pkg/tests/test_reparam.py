from __future__ import annotations

import numpy as np
import pytest

from sparse_fgam.fitting.reparam import (
    PenaltyPair,
    build_penalties,
    diagonalize,
    reconstruct_theta,
    split_design_row,
)


@pytest.fixture
def reparam():
    return diagonalize(build_penalties(10, 10, 2, 2))


@pytest.mark.parametrize(
    "kx, kt, dx, dt",
    [
        (10, 10, 2, 2),
        (6, 8, 1, 2),
        (5, 7, 3, 1),  # anisotropic_orders
    ],
)
def test_null_space_dimension(kx, kt, dx, dt):
    basis = diagonalize(build_penalties(kx, kt, dx, dt))
    assert basis.n_null == dx * dt
    assert basis.n_penalized == kx * kt - dx * dt
    assert basis.num_coefficients == kx * kt


def test_kronecker_ordering():
    penalties = build_penalties(4, 3, 2, 1)
    assert penalties.px.shape == (12, 12)
    # x index outer: Px couples entries j*Kt + k with the same k
    np.testing.assert_allclose(penalties.px[0, 3], penalties.gram_x[0, 1])
    assert penalties.px[0, 1] == 0.0
    np.testing.assert_allclose(penalties.pt[0, 1], penalties.gram_t[0, 1])
    assert penalties.pt[0, 3] == 0.0


def test_transform_diagonalizes_penalties(reparam):
    t = reparam.transform
    n0 = reparam.n_null
    for pen, psi in ((reparam.penalties.px, reparam.psi_x), (reparam.penalties.pt, reparam.psi_t)):
        congruent = t.T @ pen @ t
        np.testing.assert_allclose(congruent[n0:, n0:], np.diag(psi), atol=1e-8)
        np.testing.assert_allclose(congruent[:n0], 0.0, atol=1e-8)


def test_psi_sum_to_one(reparam):
    np.testing.assert_allclose(reparam.psi_x + reparam.psi_t, 1.0)
    assert np.all(reparam.psi_x >= 0)
    assert np.all(reparam.psi_t >= 0)
    assert np.all(reparam.s_tilde > 0)


def test_t_inverse(reparam):
    np.testing.assert_allclose(reparam.t_inverse() @ reparam.transform, np.eye(100), atol=1e-9)


@pytest.mark.parametrize(
    "lambda_x, lambda_t",
    [
        (1.0, 1.0),
        (0.1, 10.0),
        (3.0, 0.0),  # no_time_penalty
    ],
)
def test_penalty_equals_delta_precision(reparam, lambda_x, lambda_t):
    rng = np.random.default_rng(1)
    beta = rng.normal(size=reparam.n_null)
    delta = rng.normal(size=reparam.n_penalized)
    theta = reconstruct_theta(beta, delta, reparam)
    penalty = theta @ reparam.penalties.combined(lambda_x, lambda_t) @ theta
    np.testing.assert_allclose(penalty, delta @ (reparam.precision(lambda_x, lambda_t) * delta), rtol=1e-8)


def test_equal_lambdas_give_isotropic_precision(reparam):
    np.testing.assert_allclose(reparam.precision(2.5, 2.5), 2.5)


def test_split_and_reconstruct_preserve_linear_predictor(reparam):
    rng = np.random.default_rng(2)
    z = rng.normal(size=(3, 100))
    beta = rng.normal(size=(5, reparam.n_null))
    delta = rng.normal(size=(5, reparam.n_penalized))
    z0, zp = split_design_row(z, reparam)
    theta = reconstruct_theta(beta, delta, reparam)
    assert theta.shape == (5, 100)
    np.testing.assert_allclose(z @ theta.T, z0 @ beta.T + zp @ delta.T, atol=1e-9)
    np.testing.assert_allclose(reparam.t_inverse() @ theta[0], np.r_[beta[0], delta[0]], atol=1e-8)


def test_null_space_is_bilinear(reparam):
    # with second-order penalties the unpenalized surfaces are spanned by 1, j, k, jk
    j, k = np.meshgrid(np.arange(10.0), np.arange(10.0), indexing="ij")
    for theta in (np.ones(100), j.ravel(), k.ravel(), (j * k).ravel()):
        projected = reparam.t0 @ (reparam.t0.T @ theta)
        np.testing.assert_allclose(projected, theta, atol=1e-8)


@pytest.mark.parametrize(
    "gram_x",
    [
        np.array([[1.0, 2.0], [0.0, 1.0]]),  # not_symmetric
        np.array([[1.0, 0.0], [0.0, -1.0]]),  # not_psd
    ],
)
def test_diagonalize_invalid(gram_x):
    penalties = PenaltyPair(np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        diagonalize(penalties, gram_x=gram_x)


def test_coefficient_length_mismatch(reparam):
    with pytest.raises(ValueError):
        split_design_row(np.zeros(99), reparam)
    with pytest.raises(ValueError):
        reconstruct_theta(np.zeros(3), np.zeros(96), reparam)


def test_tiny_eigenvalues_count_as_zero():
    gram = np.diag([1.0, 1e-14])
    basis = diagonalize(PenaltyPair(gram, gram))
    assert basis.n_null == 1
