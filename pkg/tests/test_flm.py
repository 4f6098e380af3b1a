from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from sparse_fgam.helpers.auxiliary import FittingError
from sparse_fgam.helpers.basis import SplineBasis, WorkingGrid, bspline_eval
from sparse_fgam.simulation import flm
from sparse_fgam.simulation.flm import flm_baseline, flm_design
from sparse_fgam.simulation.generator import Scenario, generate_dataset


@pytest.fixture
def grid():
    return WorkingGrid.uniform(0.0, 1.0, 50)


def test_flm_design_against_fine_integration(grid):
    basis = SplineBasis.uniform(0.0, 1.0, 5)
    design = flm_design(np.cos(np.pi * grid.t), grid, basis)
    assert design.shape == (1, 5)
    for k in range(5):
        value, _ = integrate.quad(lambda t, k=k: np.cos(np.pi * t) * bspline_eval(basis, [t])[0, k], 0.0, 1.0, limit=100)
        assert design[0, k] == pytest.approx(value, abs=2e-3)


def test_flm_design_invalid(grid):
    with pytest.raises(ValueError, match="grid size"):
        flm_design(np.zeros((2, 49)), grid, SplineBasis.uniform(0.0, 1.0, 5))


def test_zero_trajectories_give_mean_response(grid):
    y = np.array([1.0, 2.0, 4.0, 5.0])
    fit = flm_baseline(np.zeros((4, 50)), y, grid)
    np.testing.assert_allclose(fit.coef, 0.0, atol=1e-12)
    assert fit.intercept == pytest.approx(3.0)
    assert fit.sigma2 == pytest.approx(np.var(y, ddof=1))
    np.testing.assert_allclose(fit.predict(np.zeros((2, 50))), 3.0)


def test_constant_response_is_an_exact_fit(grid):
    curves = np.vstack([np.sin(np.pi * grid.t) * a for a in (-1.0, 0.5, 2.0, 3.0)])
    fit = flm_baseline(curves, np.full(4, 2.5), grid)
    np.testing.assert_allclose(fit.coef, 0.0, atol=1e-12)
    assert fit.intercept == pytest.approx(2.5)
    assert fit.sigma2 == pytest.approx(flm.SIGMA2_FLOOR)
    assert np.isfinite(fit.log_ml)
    np.testing.assert_allclose(fit.predict(curves), 2.5)


def test_flm_recovers_linear_signal():
    data, truth = generate_dataset(Scenario(n_subjects=300, seed=3))
    fit = flm_baseline(truth.trajectories, data.y, truth.grid)
    assert fit.lam > 0
    assert np.isfinite(fit.log_ml)
    predictions = fit.predict(truth.trajectories)
    assert np.sqrt(np.mean((predictions - truth.signal) ** 2)) < 0.35
    assert fit.sigma2 == pytest.approx(1.0, rel=0.25)


def test_flm_surface_is_linear_in_x(grid):
    rng = np.random.default_rng(0)
    trajectories = rng.normal(size=(30, 1)) * np.sin(np.pi * grid.t)
    y = rng.normal(size=30)
    fit = flm_baseline(trajectories, y, grid, kt=6)
    t = np.array([0.2, 0.7])
    surface = fit.surface(np.array([0.0, 1.0, 2.0]), t)
    assert surface.shape == (3, 2)
    np.testing.assert_allclose(surface[0], fit.intercept / grid.span)
    np.testing.assert_allclose(surface[2] - surface[1], fit.beta(t))
    assert fit.beta().shape == (50,)


@pytest.mark.parametrize(
    "kwargs, match",
    [
        ({"lambdas": [1.0, 0.0]}, "Invalid lambdas"),
        ({"kappa": -1.0}, "Invalid kappa"),
    ],
)
def test_flm_invalid_settings(grid, kwargs, match):
    with pytest.raises(ValueError, match=match):
        flm_baseline(np.zeros((4, 50)), np.arange(4.0), grid, **kwargs)


def test_flm_invalid_data(grid):
    with pytest.raises(ValueError, match="at least 2"):
        flm_baseline(np.zeros((1, 50)), [1.0], grid)
    with pytest.raises(ValueError, match="rows"):
        flm_baseline(np.zeros((3, 50)), np.arange(4.0), grid)


def test_flm_singular_for_every_lambda(grid, monkeypatch):
    def singular(precision, rhs):
        raise np.linalg.LinAlgError("not positive definite")

    monkeypatch.setattr(flm, "gaussian_from_precision", singular)
    with pytest.raises(FittingError) as err:
        flm_baseline(np.zeros((4, 50)), np.arange(4.0), grid, lambdas=[0.1, 1.0])
    assert err.value.module == "flm"
