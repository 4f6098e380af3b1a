from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from sparse_fgam.helpers.basis import (
    SplineBasis,
    TensorDesign,
    WorkingGrid,
    bspline_deriv,
    bspline_eval,
    difference_matrix,
    quadrature_weights,
    tensor_design_row,
)


@pytest.fixture
def basis():
    return SplineBasis.uniform(0.0, 1.0, 10)


@pytest.mark.parametrize(
    "points",
    [
        [0.0],  # left_boundary
        [1.0],  # right_boundary
        [0.0, 0.25, 0.5, 0.75, 1.0],
        np.linspace(0.0, 1.0, 101),
    ],
)
def test_bspline_eval_partition_of_unity(basis, points):
    values = bspline_eval(basis, points)
    assert values.shape == (len(points), 10)
    assert np.all(values >= 0)
    np.testing.assert_allclose(values.sum(axis=1), 1.0, atol=1e-12)


def test_bspline_eval_boundary_values(basis):
    values = bspline_eval(basis, [0.0, 1.0])
    np.testing.assert_allclose(values[0], np.eye(10)[0], atol=1e-12)
    np.testing.assert_allclose(values[1], np.eye(10)[-1], atol=1e-12)


@pytest.mark.parametrize(
    "points",
    [
        [-0.01],  # below_domain
        [1.5],  # above_domain
        [np.nan],  # not_finite
        [],  # empty
    ],
)
def test_bspline_eval_invalid(basis, points):
    with pytest.raises(ValueError):
        bspline_eval(basis, points)


@pytest.mark.parametrize("order", [1, 2])
def test_bspline_deriv_rows_sum_to_zero(basis, order):
    values = bspline_deriv(basis, np.linspace(0.0, 1.0, 33), order)
    np.testing.assert_allclose(values.sum(axis=1), 0.0, atol=1e-9)


def test_bspline_deriv_matches_finite_difference(basis):
    points = np.array([0.13, 0.4, 0.77])
    step = 1e-6
    numeric = (bspline_eval(basis, points + step) - bspline_eval(basis, points - step)) / (2 * step)
    np.testing.assert_allclose(bspline_deriv(basis, points, 1), numeric, atol=1e-5)


@pytest.mark.parametrize(
    "order, degree",
    [
        (3, 3),  # order_not_supported
        (2, 1),  # order_exceeds_degree
    ],
)
def test_bspline_deriv_invalid(order, degree):
    basis = SplineBasis.uniform(0.0, 1.0, 6, degree=degree)
    with pytest.raises(ValueError):
        bspline_deriv(basis, [0.5], order)


@pytest.mark.parametrize(
    "lo, hi, knots, degree",
    [
        (1.0, 1.0, (), 3),  # empty_domain
        (0.0, 1.0, (0.5, 0.4), 3),  # decreasing_knots
        (0.0, 1.0, (1.0,), 3),  # knot_on_boundary
        (0.0, 1.0, (), -1),  # negative_degree
    ],
)
def test_spline_basis_invalid(lo, hi, knots, degree):
    with pytest.raises(ValueError):
        SplineBasis(lo, hi, knots, degree)


def test_spline_basis_uniform_too_few():
    with pytest.raises(ValueError):
        SplineBasis.uniform(0.0, 1.0, 3, degree=3)


def test_clamp_counts_moved_points(basis):
    clamped, moved = basis.clamp([-1.0, 0.5, 2.0])
    np.testing.assert_array_equal(clamped, [0.0, 0.5, 1.0])
    assert moved == 2


@pytest.mark.parametrize(
    "num_basis, order, rank",
    [
        (10, 1, 9),
        (10, 2, 8),
        (6, 3, 3),
    ],
)
def test_difference_matrix_rank(num_basis, order, rank):
    penalty = difference_matrix(num_basis, order)
    assert penalty.matrix.shape == (num_basis - order, num_basis)
    assert np.linalg.matrix_rank(penalty.gram) == rank
    np.testing.assert_allclose(penalty.gram, penalty.gram.T)
    # polynomials of degree < order are in the null space
    for power in range(order):
        np.testing.assert_allclose(penalty.gram @ np.arange(num_basis, dtype=float) ** power, 0.0, atol=1e-8)


def test_difference_matrix_second_order_values():
    np.testing.assert_array_equal(difference_matrix(4, 2).matrix, [[1, -2, 1, 0], [0, 1, -2, 1]])


@pytest.mark.parametrize("order", [0, 10])
def test_difference_matrix_invalid(order):
    with pytest.raises(ValueError):
        difference_matrix(10, order)


@pytest.mark.parametrize(
    "t, expected",
    [
        ([0.0, 1.0], [0.5, 0.5]),
        ([0.0, 0.5, 1.0], [0.25, 0.5, 0.25]),
        ([0.0, 1.0, 3.0], [0.5, 1.5, 1.0]),  # uneven_steps
    ],
)
def test_quadrature_weights(t, expected):
    np.testing.assert_allclose(quadrature_weights(t), expected)


@pytest.mark.parametrize(
    "t",
    [
        [0.0],  # single_point
        [0.0, 0.0, 1.0],  # repeated_point
        [1.0, 0.0],  # decreasing
    ],
)
def test_quadrature_weights_invalid(t):
    with pytest.raises(ValueError):
        quadrature_weights(t)


def test_working_grid_integrates_polynomial():
    grid = WorkingGrid.uniform(0.0, 2.0, 201)
    assert grid.size == 201
    assert grid.span == 2.0
    np.testing.assert_allclose(grid.integrate(grid.t**2), 8.0 / 3.0, rtol=1e-4)
    np.testing.assert_allclose(grid.integrate(np.ones((3, 201))), [2.0, 2.0, 2.0])


def test_tensor_design_row_ordering():
    grid = WorkingGrid.uniform(0.0, 1.0, 50)
    basis_x = SplineBasis.uniform(-3.0, 3.0, 5)
    basis_t = SplineBasis.uniform(0.0, 1.0, 4)
    x = np.sin(2 * np.pi * grid.t)
    row = tensor_design_row(x, basis_x, basis_t, grid)
    bx, bt = bspline_eval(basis_x, x), bspline_eval(basis_t, grid.t)
    expected = np.array([[np.sum(grid.weights * bx[:, j] * bt[:, k]) for k in range(4)] for j in range(5)]).ravel()
    np.testing.assert_allclose(row, expected, atol=1e-14)
    # partition of unity: the row sums to the length of the domain
    np.testing.assert_allclose(row.sum(), 1.0)


def test_tensor_design_row_against_fine_integration():
    grid = WorkingGrid.uniform(0.0, 1.0, 4001)
    basis_x = SplineBasis.uniform(-2.0, 2.0, 6)
    basis_t = SplineBasis.uniform(0.0, 1.0, 5)
    row = tensor_design_row(1.5 * np.cos(np.pi * grid.t), basis_x, basis_t, grid)

    def integrand(t, j, k):
        x = 1.5 * np.cos(np.pi * t)
        return bspline_eval(basis_x, [x])[0, j] * bspline_eval(basis_t, [t])[0, k]

    for j, k in [(0, 0), (2, 3), (5, 4)]:
        value, _ = integrate.quad(integrand, 0.0, 1.0, args=(j, k), limit=200)
        np.testing.assert_allclose(row[j * 5 + k], value, atol=1e-6)


def test_tensor_design_rows_clamp():
    grid = WorkingGrid.uniform(0.0, 1.0, 20)
    design = TensorDesign(SplineBasis.uniform(-1.0, 1.0, 5), SplineBasis.uniform(0.0, 1.0, 5), grid)
    inside = np.full(20, 1.0)
    outside = np.full(20, 3.0)
    rows, n_clamped = design.rows(np.vstack([inside, outside]))
    assert n_clamped == 20
    np.testing.assert_allclose(rows[0], rows[1])
    single, n_single = design.row(outside)
    np.testing.assert_allclose(single, rows[1])
    assert n_single == 20


@pytest.mark.parametrize(
    "x",
    [
        np.zeros(19),  # wrong_length
        np.r_[np.zeros(19), np.nan],  # not_finite
    ],
)
def test_tensor_design_row_invalid(x):
    grid = WorkingGrid.uniform(0.0, 1.0, 20)
    design = TensorDesign(SplineBasis.uniform(-1.0, 1.0, 5), SplineBasis.uniform(0.0, 1.0, 5), grid)
    with pytest.raises(ValueError):
        design.row(x)


def test_row_derivatives_match_finite_differences():
    grid = WorkingGrid.uniform(0.0, 1.0, 30)
    design = TensorDesign(SplineBasis.uniform(-5.0, 5.0, 7), SplineBasis.uniform(0.0, 1.0, 6), grid)
    phi = np.column_stack([np.sin(np.pi * grid.t), np.cos(np.pi * grid.t)])
    xi = np.array([0.7, -0.4])
    row, jac, hess, n_clamped = design.row_derivatives(phi @ xi, phi)
    assert n_clamped == 0
    assert jac.shape == (2, 42)
    assert hess.shape == (2, 2, 42)
    np.testing.assert_allclose(row, design.row(phi @ xi)[0])

    step = 1e-5
    for m in range(2):
        shift = np.eye(2)[m] * step
        plus, _, _, _ = design.row_derivatives(phi @ (xi + shift), phi)
        minus, _, _, _ = design.row_derivatives(phi @ (xi - shift), phi)
        np.testing.assert_allclose(jac[m], (plus - minus) / (2 * step), atol=1e-6)
        jac_plus = design.row_derivatives(phi @ (xi + shift), phi)[1]
        jac_minus = design.row_derivatives(phi @ (xi - shift), phi)[1]
        np.testing.assert_allclose(hess[m], (jac_plus - jac_minus) / (2 * step), atol=1e-4)


def test_surface_evaluation_stacked():
    grid = WorkingGrid.uniform(0.0, 1.0, 10)
    design = TensorDesign(SplineBasis.uniform(0.0, 1.0, 4), SplineBasis.uniform(0.0, 1.0, 4), grid)
    ones = np.ones(16)
    surface = design.surface(ones, [0.0, 0.5, 1.0], [0.1, 0.9])
    np.testing.assert_allclose(surface, np.ones((3, 2)))
    stacked = design.surface(np.vstack([ones, 2 * ones]), [0.5], [0.5])
    np.testing.assert_allclose(stacked[:, 0, 0], [1.0, 2.0])
