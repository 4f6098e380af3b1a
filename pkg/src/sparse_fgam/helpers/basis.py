"""
B-spline bases, difference penalties and quadrature on the working grid.

The tensor-product design row of a trajectory is built here as well, together with its
first and second derivatives with respect to the principal component scores.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import BSpline

from .auxiliary import FloatArray, SequenceFloatType


class SplineBasis:
    """
    B-spline basis of a given degree on a closed interval.

    Parameters
    ----------
    lo : float
        Left end of the domain.
    hi : float
        Right end of the domain.
    interior_knots : sequence of float
        Strictly increasing interior knots, all inside ``(lo, hi)``.
    degree : int, default: 3
        Polynomial degree of the basis functions.

    Raises
    ------
    ValueError
        If the domain is empty, the degree is negative or the knots are not strictly
        increasing inside the domain.

    Notes
    -----
    The full knot vector repeats each boundary ``degree + 1`` times, so the number of basis
    functions equals ``len(interior_knots) + degree + 1``.
    """

    def __init__(self, lo: float, hi: float, interior_knots: SequenceFloatType = (), degree: int = 3) -> None:
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
            raise ValueError(f"Invalid domain: [{lo}, {hi}]. Must be a finite, non-empty interval.")
        if degree < 0:
            raise ValueError(f"Invalid degree: {degree}. Must be zero or positive.")
        interior = np.asarray(interior_knots, dtype=float)
        if interior.size and (np.any(np.diff(interior) <= 0) or interior[0] <= lo or interior[-1] >= hi):
            raise ValueError("Invalid interior_knots: must be strictly increasing and inside the domain.")

        self.lo = float(lo)
        self.hi = float(hi)
        self.degree = int(degree)
        self.interior_knots = interior
        self.knots = np.concatenate([np.full(degree + 1, self.lo), interior, np.full(degree + 1, self.hi)])
        self.num_basis = interior.size + degree + 1
        self._spline = BSpline(self.knots, np.eye(self.num_basis), self.degree, extrapolate=False)

    @classmethod
    def uniform(cls, lo: float, hi: float, num_basis: int, degree: int = 3) -> SplineBasis:
        """
        Build a basis with equally spaced interior knots.

        Parameters
        ----------
        lo : float
            Left end of the domain.
        hi : float
            Right end of the domain.
        num_basis : int
            Number of basis functions; must be at least ``degree + 1``.
        degree : int, default: 3
            Polynomial degree.

        Returns
        -------
        SplineBasis
            Basis with ``num_basis - degree - 1`` equally spaced interior knots.

        Raises
        ------
        ValueError
            If `num_basis` is smaller than ``degree + 1``.
        """
        n_interior = num_basis - degree - 1
        if n_interior < 0:
            raise ValueError(f"Invalid num_basis: {num_basis}. Must be at least degree + 1 = {degree + 1}.")
        interior = np.linspace(lo, hi, n_interior + 2)[1:-1]
        return cls(lo, hi, interior, degree)

    @property
    def domain(self) -> tuple[float, float]:
        """Closed interval on which the basis is defined."""
        return self.lo, self.hi

    def clamp(self, points: SequenceFloatType) -> tuple[FloatArray, int]:
        """
        Clamp points to the basis domain.

        Parameters
        ----------
        points : sequence of float
            Points to clamp.

        Returns
        -------
        tuple of (numpy.ndarray, int)
            Clamped points and the number of points that were moved.
        """
        arr = np.asarray(points, dtype=float)
        clamped = np.clip(arr, self.lo, self.hi)
        return clamped, int(np.count_nonzero(clamped != arr))

    def _validate_points(self, points: SequenceFloatType) -> FloatArray:
        arr = np.atleast_1d(np.asarray(points, dtype=float))
        if arr.size == 0:
            raise ValueError("Input points must contain at least one element.")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Input points must be finite.")
        if arr.min() < self.lo or arr.max() > self.hi:
            raise ValueError(f"Input points outside the basis domain [{self.lo}, {self.hi}]. Clamp them first.")
        return arr

    def __repr__(self) -> str:
        return f"SplineBasis(lo={self.lo}, hi={self.hi}, num_basis={self.num_basis}, degree={self.degree})"


class DifferencePenalty:
    """
    Difference penalty of order `d` on `K` coefficients.

    Parameters
    ----------
    matrix : numpy.ndarray
        The ``(K - d) x K`` difference operator.
    order : int
        Difference order.
    """

    def __init__(self, matrix: FloatArray, order: int) -> None:
        self.matrix = matrix
        self.order = order
        self.num_basis = matrix.shape[1]
        self.gram = matrix.T @ matrix

    def __repr__(self) -> str:
        return f"DifferencePenalty(num_basis={self.num_basis}, order={self.order})"


class WorkingGrid:
    """
    Evaluation grid with trapezoid quadrature weights.

    Parameters
    ----------
    t : sequence of float
        Strictly increasing grid points.
    """

    def __init__(self, t: SequenceFloatType) -> None:
        self.t = np.asarray(t, dtype=float)
        self.weights = quadrature_weights(self.t)

    @classmethod
    def uniform(cls, lo: float, hi: float, size: int = 50) -> WorkingGrid:
        """
        Equally spaced grid including both end points.

        Parameters
        ----------
        lo : float
            First grid point.
        hi : float
            Last grid point.
        size : int, default: 50
            Number of grid points.

        Returns
        -------
        WorkingGrid
            The grid.
        """
        if size < 2:
            raise ValueError(f"Invalid size: {size}. Must be at least 2.")
        return cls(np.linspace(lo, hi, size))

    @property
    def size(self) -> int:
        """Number of grid points."""
        return int(self.t.size)

    @property
    def span(self) -> float:
        """Length of the interval covered by the grid."""
        return float(self.t[-1] - self.t[0])

    def integrate(self, values: FloatArray) -> FloatArray:
        """
        Integrate values sampled on the grid along their last axis.

        Parameters
        ----------
        values : numpy.ndarray
            Array whose last axis has length :py:attr:`size`.

        Returns
        -------
        numpy.ndarray
            Quadrature sums along the last axis.
        """
        return np.asarray(values, dtype=float) @ self.weights

    def __repr__(self) -> str:
        return f"WorkingGrid(lo={self.t[0]}, hi={self.t[-1]}, size={self.size})"


def bspline_eval(basis: SplineBasis, points: SequenceFloatType) -> FloatArray:
    """
    Evaluate every basis function at the given points.

    Parameters
    ----------
    basis : SplineBasis
        Basis to evaluate.
    points : sequence of float
        Evaluation points inside the basis domain.

    Returns
    -------
    numpy.ndarray
        Matrix of shape ``(len(points), basis.num_basis)``; every row sums to one.

    Raises
    ------
    ValueError
        If `points` is empty, non-finite or outside the domain.
    """
    arr = basis._validate_points(points)
    return np.asarray(basis._spline(arr), dtype=float)


def bspline_deriv(basis: SplineBasis, points: SequenceFloatType, order: int = 1) -> FloatArray:
    """
    Evaluate first or second derivatives of every basis function.

    Parameters
    ----------
    basis : SplineBasis
        Basis to differentiate.
    points : sequence of float
        Evaluation points inside the basis domain.
    order : {1, 2}
        Derivative order.

    Returns
    -------
    numpy.ndarray
        Matrix of shape ``(len(points), basis.num_basis)``; every row sums to zero.

    Raises
    ------
    ValueError
        If `order` is not 1 or 2, or exceeds the basis degree.
    """
    if order not in (1, 2):
        raise ValueError(f"Invalid order: {order}. Must be 1 or 2.")
    if order > basis.degree:
        raise ValueError(f"Invalid order: {order}. Must not exceed the basis degree {basis.degree}.")
    arr = basis._validate_points(points)
    return np.asarray(basis._spline(arr, nu=order), dtype=float)


def difference_matrix(num_basis: int, order: int) -> DifferencePenalty:
    """
    Forward-difference operator of the given order.

    Parameters
    ----------
    num_basis : int
        Number of coefficients `K`.
    order : int
        Difference order `d`, with ``1 <= d < K``.

    Returns
    -------
    DifferencePenalty
        Penalty whose gram matrix has rank ``K - d``.

    Raises
    ------
    ValueError
        If `order` is not in ``[1, K)``.
    """
    if order < 1 or order >= num_basis:
        raise ValueError(f"Invalid order: {order}. Must satisfy 1 <= order < {num_basis}.")
    return DifferencePenalty(np.diff(np.eye(num_basis), n=order, axis=0), order)


def quadrature_weights(t: SequenceFloatType) -> FloatArray:
    """
    Trapezoid weights for a strictly increasing grid.

    Parameters
    ----------
    t : sequence of float
        Grid points.

    Returns
    -------
    numpy.ndarray
        Non-negative weights summing to ``t[-1] - t[0]``.

    Raises
    ------
    ValueError
        If fewer than two points are given or the grid is not strictly increasing.
    """
    arr = np.asarray(t, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("Input grid must contain at least two points.")
    steps = np.diff(arr)
    if np.any(steps <= 0):
        raise ValueError("Input grid must be strictly increasing.")
    weights = np.zeros_like(arr)
    weights[:-1] += steps / 2.0
    weights[1:] += steps / 2.0
    return weights


class TensorDesign:
    """
    Tensor-product design rows ``z = L^T B(x)`` for trajectories on a working grid.

    Row entries are ordered with the `x` basis index outer and the `t` basis index inner,
    i.e. entry ``j * Kt + k`` pairs ``B^X_j`` with ``B^T_k``.

    Parameters
    ----------
    basis_x : SplineBasis
        Basis over trajectory values.
    basis_t : SplineBasis
        Basis over time; its domain must cover the grid.
    grid : WorkingGrid
        Working grid the trajectories are sampled on.
    """

    def __init__(self, basis_x: SplineBasis, basis_t: SplineBasis, grid: WorkingGrid) -> None:
        self.basis_x = basis_x
        self.basis_t = basis_t
        self.grid = grid
        self.num_coefficients = basis_x.num_basis * basis_t.num_basis
        self.bt = bspline_eval(basis_t, grid.t)
        self._weighted_bt = grid.weights[:, None] * self.bt

    def row(self, x: SequenceFloatType) -> tuple[FloatArray, int]:
        """
        Design row of a trajectory sampled on the grid.

        Parameters
        ----------
        x : sequence of float
            Trajectory values at the grid points.

        Returns
        -------
        tuple of (numpy.ndarray, int)
            Row of length ``Kx * Kt`` and the number of clamped trajectory values.

        Raises
        ------
        ValueError
            If `x` has the wrong length or non-finite values.
        """
        arr = self._check_trajectory(x)
        clamped, n_clamped = self.basis_x.clamp(arr)
        bx = bspline_eval(self.basis_x, clamped)
        return (bx.T @ self._weighted_bt).ravel(), n_clamped

    def rows(self, trajectories: FloatArray) -> tuple[FloatArray, int]:
        """
        Design rows for a stack of trajectories.

        Parameters
        ----------
        trajectories : numpy.ndarray
            Array of shape ``(n, T)``.

        Returns
        -------
        tuple of (numpy.ndarray, int)
            Rows of shape ``(n, Kx * Kt)`` and the total number of clamped values.
        """
        trajectories = np.atleast_2d(np.asarray(trajectories, dtype=float))
        if trajectories.shape[1] != self.grid.size:
            raise ValueError(f"Invalid trajectories: {trajectories.shape[1]} columns. Must be {self.grid.size}.")
        if not np.all(np.isfinite(trajectories)):
            raise ValueError("Input trajectories must be finite.")
        clamped, n_clamped = self.basis_x.clamp(trajectories.ravel())
        bx = bspline_eval(self.basis_x, clamped).reshape(trajectories.shape[0], self.grid.size, -1)
        rows = np.einsum("itj,tk->ijk", bx, self._weighted_bt)
        return rows.reshape(trajectories.shape[0], self.num_coefficients), n_clamped

    def row_derivatives(self, x: SequenceFloatType, phi: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray, int]:
        """
        Design row with its first and second derivatives with respect to scores.

        The trajectory is ``x = mu + phi @ xi``; derivatives are taken with respect to `xi`.
        Grid points where the trajectory had to be clamped contribute no derivative.

        Parameters
        ----------
        x : sequence of float
            Trajectory values at the grid points.
        phi : numpy.ndarray
            Eigenfunctions on the grid, shape ``(T, M)``.

        Returns
        -------
        tuple of (numpy.ndarray, numpy.ndarray, numpy.ndarray, int)
            Row ``b`` of length ``Kx * Kt``, Jacobian of shape ``(M, Kx * Kt)``, second
            derivative array of shape ``(M, M, Kx * Kt)`` and the number of clamped values.
        """
        arr = self._check_trajectory(x)
        clamped, n_clamped = self.basis_x.clamp(arr)
        inside = (clamped == arr).astype(float)[:, None]
        bx = bspline_eval(self.basis_x, clamped)
        dbx = bspline_deriv(self.basis_x, clamped, 1) * inside if self.basis_x.degree >= 1 else np.zeros_like(bx)
        ddbx = bspline_deriv(self.basis_x, clamped, 2) * inside if self.basis_x.degree >= 2 else np.zeros_like(bx)
        weighted_phi = phi * self.grid.weights[:, None]
        row = (bx.T @ self._weighted_bt).ravel()
        jac = np.einsum("tm,tj,tk->mjk", weighted_phi, dbx, self.bt).reshape(phi.shape[1], -1)
        hess = np.einsum("tm,tn,tj,tk->mnjk", weighted_phi, phi, ddbx, self.bt).reshape(phi.shape[1], phi.shape[1], -1)
        return row, jac, hess, n_clamped

    def surface(self, theta: FloatArray, x: SequenceFloatType, t: SequenceFloatType) -> FloatArray:
        """
        Evaluate ``F(x, t) = sum_jk theta_jk B^X_j(x) B^T_k(t)`` on a rectangular grid.

        Parameters
        ----------
        theta : numpy.ndarray
            Coefficients of length ``Kx * Kt``, or a stack of shape ``(S, Kx * Kt)``.
        x : sequence of float
            Trajectory-value axis; values outside the basis domain are clamped.
        t : sequence of float
            Time axis inside the time basis domain.

        Returns
        -------
        numpy.ndarray
            Surface of shape ``(len(x), len(t))``, or ``(S, len(x), len(t))`` for stacked input.
        """
        bx = bspline_eval(self.basis_x, self.basis_x.clamp(x)[0])
        bt = bspline_eval(self.basis_t, t)
        theta = np.asarray(theta, dtype=float)
        coefs = theta.reshape(*theta.shape[:-1], self.basis_x.num_basis, self.basis_t.num_basis)
        return np.einsum("aj,...jk,bk->...ab", bx, coefs, bt)

    def _check_trajectory(self, x: SequenceFloatType) -> FloatArray:
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.grid.size,):
            raise ValueError(f"Invalid trajectory length: {arr.size}. Must be {self.grid.size}.")
        if not np.all(np.isfinite(arr)):
            raise ValueError("Input trajectory contains non-finite values.")
        return arr


def tensor_design_row(x: SequenceFloatType, basis_x: SplineBasis, basis_t: SplineBasis, grid: WorkingGrid) -> FloatArray:
    """
    Quadrature-weighted tensor-product design row of one trajectory.

    Parameters
    ----------
    x : sequence of float
        Trajectory on the working grid.
    basis_x : SplineBasis
        Basis over trajectory values.
    basis_t : SplineBasis
        Basis over time.
    grid : WorkingGrid
        Working grid.

    Returns
    -------
    numpy.ndarray
        Row ``z`` with ``z[j * Kt + k] = sum_t L_t B^X_j(x(t)) B^T_k(t)``.

    Raises
    ------
    ValueError
        If `x` contains non-finite values or does not match the grid.
    """
    return TensorDesign(basis_x, basis_t, grid).row(x)[0]
