from __future__ import annotations

import numpy as np
import pytest

from sparse_fgam.simulation.generator import Scenario, eigenfunctions, generate_dataset, true_surface


@pytest.mark.parametrize(
    "name, x, t, expected",
    [
        ("F1", 1.0, 0.5, 2.0),
        ("F1", -3.0, 0.0, 0.0),  # zero_at_boundary
        ("F2", -40.0, 0.0, 20.0),  # peak
        ("F2", 0.0, 10.0, 20.0 * np.cos(-2.5)),
    ],
)
def test_true_surface(name, x, t, expected):
    assert true_surface(name, x, t) == pytest.approx(expected)


@pytest.mark.parametrize(
    "name, t",
    [
        ("F2", 20.0),  # outside_domain
        ("F1", -0.1),  # below_domain
        ("F3", 0.5),  # unknown_surface
    ],
)
def test_true_surface_invalid(name, t):
    with pytest.raises(ValueError):
        true_surface(name, 0.0, t)


def test_eigenfunctions():
    values = eigenfunctions([0.0, 0.5, 1.0], (0.0, 1.0))
    assert values.shape == (3, 4)
    np.testing.assert_allclose(values[1], [1.0, 0.0, 0.0, -1.0], atol=1e-12)
    # the time axis is scaled by the domain length
    np.testing.assert_allclose(eigenfunctions([5.0], (0.0, 10.0)), values[[1]], atol=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"surface": "F3"},
        {"n_points": 0},
        {"n_points": 51},
        {"train_fraction": 1.0},
        {"sigma_x2": -1.0},
    ],
)
def test_scenario_invalid(kwargs):
    with pytest.raises(ValueError):
        Scenario(**kwargs)


def test_scenario_properties():
    scenario = Scenario("F2", n_points=40, seed=7)
    assert scenario.domain == (0.0, 10.0)
    assert scenario.n_train == 67
    assert scenario.label() == "F2_J40_sx1"
    other = scenario.with_seed(8)
    assert other.seed == 8
    assert other.label() == scenario.label()


def test_generate_dataset_layout():
    scenario = Scenario(n_points=10, seed=1)
    data, truth = generate_dataset(scenario)
    assert data.n_subjects == 100
    assert data.ids[:2] == ["s001", "s002"]
    assert data.ids[-1] == "s100"
    grid_times = set(truth.grid.t)
    for subject in data.subjects:
        assert subject.n_obs == 10
        assert set(subject.times) <= grid_times
    assert truth.trajectories.shape == (100, 50)
    assert truth.grid.t[-1] == 1.0


def test_generate_dataset_reproducible():
    first, _ = generate_dataset(Scenario(seed=3))
    second, _ = generate_dataset(Scenario(seed=3))
    third, _ = generate_dataset(Scenario(seed=4))
    np.testing.assert_array_equal(first.y, second.y)
    np.testing.assert_array_equal(first.subjects[5].values, second.subjects[5].values)
    assert not np.array_equal(first.y, third.y)


def test_generate_dataset_moments():
    data, truth = generate_dataset(Scenario(n_points=2, n_subjects=10000, seed=11))
    variances = truth.scores.var(axis=0)
    np.testing.assert_allclose(variances, 8.0 / np.arange(1, 5) ** 2, rtol=0.05)
    np.testing.assert_allclose(np.var(data.y - truth.signal), 1.0, rtol=0.05)


@pytest.mark.parametrize(
    "sigma_x2, label",
    [
        (0.25, "F1_J20_sx0.25"),
        (4.0, "F1_J20_sx4"),  # largest_design_level
    ],
)
def test_measurement_error_variance(sigma_x2, label):
    scenario = Scenario(n_points=20, sigma_x2=sigma_x2, n_subjects=500, seed=2)
    assert scenario.label() == label
    data, truth = generate_dataset(scenario)
    errors = np.concatenate(
        [subject.values - np.interp(subject.times, truth.grid.t, curve) for subject, curve in zip(data.subjects, truth.trajectories, strict=True)]
    )
    np.testing.assert_allclose(errors.var(), sigma_x2, rtol=0.05)
    assert truth.oracle_fpca(range(5)).sigma_x2 == sigma_x2


def test_signal_is_integrated_surface():
    data, truth = generate_dataset(Scenario(n_subjects=5, seed=0))
    expected = [truth.grid.integrate(2.0 * curve * np.sin(np.pi * truth.grid.t)) for curve in truth.trajectories]
    np.testing.assert_allclose(truth.signal, expected)


def test_oracle_fpca_reproduces_truth():
    _, truth = generate_dataset(Scenario(seed=6))
    oracle = truth.oracle_fpca(range(10))
    assert oracle.n_components == 4
    np.testing.assert_allclose(oracle.trajectories(), truth.trajectories[:10], atol=1e-12)
    norms = truth.grid.integrate(oracle.phi.T**2)
    np.testing.assert_allclose(norms, 1.0)
    assert oracle.diagnostics["oracle"]
