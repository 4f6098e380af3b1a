"""Accuracy metrics for trajectories, surfaces and predictions."""

from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay, QhullError

from ..helpers.auxiliary import BoolArray, FloatArray, inspect_arrays
from ..helpers.basis import WorkingGrid


def rmise_x(truth: FloatArray, estimates: FloatArray, grid: WorkingGrid, indices: FloatArray | None = None) -> float:
    """
    Root mean integrated squared error of trajectories.

    Parameters
    ----------
    truth : numpy.ndarray
        True curves on the grid, shape ``(N, T)``.
    estimates : numpy.ndarray
        Estimated curves, same shape as `truth` (or as ``truth[indices]``).
    grid : WorkingGrid
        Grid supplying the quadrature weights.
    indices : sequence of int, optional
        Rows of `truth` to compare.

    Returns
    -------
    float
        ``sqrt(mean_i ∫ (X_i - X̂_i)^2 dt)``.

    Raises
    ------
    ValueError
        If the shapes do not match the grid.
    """
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if indices is not None:
        truth = truth[np.asarray(indices, dtype=int)]
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    if truth.shape != estimates.shape or truth.shape[1] != grid.size:
        raise ValueError(f"Invalid shapes: truth {truth.shape}, estimates {estimates.shape}. Must match and have {grid.size} columns.")
    return float(np.sqrt(np.mean(grid.integrate((truth - estimates) ** 2))))


def hull_mask(trajectories: FloatArray, times: FloatArray, x: FloatArray, t: FloatArray) -> BoolArray:
    """
    Grid cells inside the convex hull of the points ``(X_i(t), t)``.

    Parameters
    ----------
    trajectories : numpy.ndarray
        Curves of shape ``(N, T)``.
    times : numpy.ndarray
        Times of the curve samples.
    x : numpy.ndarray
        Trajectory-value axis of the evaluation grid.
    t : numpy.ndarray
        Time axis of the evaluation grid.

    Returns
    -------
    numpy.ndarray
        Boolean mask of shape ``(len(x), len(t))``.

    Raises
    ------
    ValueError
        If the points do not span a two-dimensional hull.
    """
    trajectories = np.atleast_2d(np.asarray(trajectories, dtype=float))
    points = np.column_stack([trajectories.ravel(), np.tile(np.asarray(times, dtype=float), trajectories.shape[0])])
    try:
        triangulation = Delaunay(points)
    except (QhullError, ValueError) as err:
        raise ValueError(f"Invalid trajectories: no two-dimensional convex hull ({err}).") from None
    xx, tt = np.meshgrid(x, t, indexing="ij")
    return triangulation.find_simplex(np.column_stack([xx.ravel(), tt.ravel()])).reshape(xx.shape) >= 0


def rise_f(truth: FloatArray, estimate: FloatArray, mask: BoolArray | None = None) -> float:
    """
    Root integrated squared error of a surface over the masked grid cells.

    Parameters
    ----------
    truth : numpy.ndarray
        True surface on a rectangular grid.
    estimate : numpy.ndarray
        Estimated surface, same shape.
    mask : numpy.ndarray, optional
        Cells to include; all cells by default.

    Returns
    -------
    float
        Square root of the mean squared difference over the included cells.

    Raises
    ------
    ValueError
        If shapes differ or the mask is empty.
    """
    truth = np.asarray(truth, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    if truth.shape != estimate.shape:
        raise ValueError(f"Invalid shapes: truth {truth.shape}, estimate {estimate.shape}. Must match.")
    mask = np.ones(truth.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("Invalid mask: the convex hull contains no grid cell.")
    return float(np.sqrt(np.mean((truth[mask] - estimate[mask]) ** 2)))


@inspect_arrays("y", "y_hat")
def rmse_y(y: FloatArray, y_hat: FloatArray) -> float:
    """
    Root mean squared prediction error.

    Parameters
    ----------
    y : sequence of float
        Observed responses.
    y_hat : sequence of float
        Predictions.

    Returns
    -------
    float
        ``sqrt(mean((y - y_hat)^2))``.

    Raises
    ------
    ValueError
        If the inputs are empty or of different lengths.
    """
    if y.size == 0:
        raise ValueError("Input y must contain at least one element.")
    return float(np.sqrt(np.mean((y - y_hat) ** 2)))
