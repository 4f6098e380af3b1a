from __future__ import annotations

import numpy as np
import pytest

from sparse_fgam.fitting.model import BasisOptions, FgamModel, Hyperparameters
from sparse_fgam.helpers.auxiliary import DatasetError
from sparse_fgam.helpers.dataset import Subject

from .helpers.problems import small_model, small_problem


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kx": 3},  # too_few_x
        {"kt": 2},  # too_few_t
        {"dx": 0},  # zero_order
        {"dt": 10},  # order_not_below_k
        {"x_margin": -0.1},  # negative_margin
    ],
)
def test_basis_options_invalid(kwargs):
    with pytest.raises(ValueError):
        BasisOptions(**kwargs)


@pytest.mark.parametrize(
    "name",
    ["a_s", "b_s", "a_x", "b_x", "a_l", "b_l", "sigma_beta2", "sigma_eta2"],
)
def test_hyperparameters_must_be_positive(name):
    with pytest.raises(ValueError, match=f"Invalid {name}"):
        Hyperparameters(**{name: 0.0})


def test_model_structure():
    model = small_model()
    data, _, fpca = small_problem()
    assert model.n_subjects == 40
    assert model.n_offsets == 0
    assert model.reparam.n_null == 4
    assert model.reparam.n_penalized == 32
    assert model.total_obs == 400
    # the x basis covers every fitted trajectory value
    trajectories = fpca.trajectories()
    assert model.basis_x.lo < trajectories.min()
    assert model.basis_x.hi > trajectories.max()


def test_design_rows_match_tensor_rows():
    model = small_model()
    z0, zp, n_clamped = model.design_rows(model.fpca.scores)
    assert n_clamped == 0
    assert z0.shape == (40, 4)
    assert zp.shape == (40, 32)
    rows, _ = model.design.rows(model.fpca.trajectories())
    theta = np.random.default_rng(0).normal(size=36)
    coefficients = model.reparam.t_inverse() @ theta
    np.testing.assert_allclose(rows @ theta, z0 @ coefficients[:4] + zp @ coefficients[4:], atol=1e-9)


def test_x_residual_ss_at_zero_scores():
    model = small_model()
    zeros = np.zeros_like(model.fpca.scores)
    expected = sum(float(term.resid @ term.resid) for term in model.terms)
    assert model.x_residual_ss(zeros) == pytest.approx(expected)
    assert model.x_residual_ss(model.fpca.scores) < expected


def test_new_subject_terms_checks_offsets():
    model = small_model()
    terms = model.new_subject_terms([Subject("new", [0.2, 0.4], [1.0, 0.0])])
    assert terms[0].phi.shape == (2, model.fpca.n_components)
    with pytest.raises(DatasetError, match="offset"):
        model.new_subject_terms([Subject("new", [0.2], [1.0], offsets=[1.0])])


def test_surface_axes():
    model = small_model()
    x, t = model.surface_axes(size=7)
    assert x.shape == (7,)
    assert t[0] == 0.0
    assert t[-1] == 1.0
    assert x[0] == pytest.approx(model.fpca.trajectories().min())


def test_model_rejects_mismatched_scores():
    data, _, fpca = small_problem()
    with pytest.raises(ValueError, match="score rows"):
        FgamModel(data.subset(range(10)), fpca)
