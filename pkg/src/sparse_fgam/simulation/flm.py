"""Penalized functional linear model used as a baseline comparator."""

from __future__ import annotations
import logging
from collections.abc import Sequence

import numpy as np

from ..helpers.auxiliary import FittingError, FloatArray
from ..helpers.basis import SplineBasis, WorkingGrid, bspline_eval, difference_matrix
from ..helpers.statistics import gaussian_from_precision


logger = logging.getLogger(__name__)

ZERO_EIGENVALUE_RTOL = 1e-10
SIGMA2_FLOOR = 1e-12


def flm_design(trajectories: FloatArray, grid: WorkingGrid, basis: SplineBasis) -> FloatArray:
    """
    Design matrix ``z_ik = ∫ X_i(t) B_k(t) dt`` under the grid quadrature.

    Parameters
    ----------
    trajectories : numpy.ndarray
        Dense curves on the grid, shape ``(N, T)``.
    grid : WorkingGrid
        Quadrature grid.
    basis : SplineBasis
        Basis of the coefficient function.

    Returns
    -------
    numpy.ndarray
        Matrix of shape ``(N, K)``.
    """
    trajectories = np.atleast_2d(np.asarray(trajectories, dtype=float))
    if trajectories.shape[1] != grid.size:
        raise ValueError(f"Invalid trajectories: {trajectories.shape[1]} columns. Must match the grid size {grid.size}.")
    return (trajectories * grid.weights) @ bspline_eval(basis, grid.t)


class FlmFit:
    """
    Fitted functional linear model ``y = α + ∫ X(t) β(t) dt + ε``.

    Parameters
    ----------
    grid : WorkingGrid
        Quadrature grid.
    basis : SplineBasis
        Basis of ``β``.
    coef : numpy.ndarray
        Posterior-mean spline coefficients of ``β``.
    intercept : float
        Intercept ``α``.
    lam : float
        Selected smoothing parameter.
    sigma2 : float
        Profiled noise variance.
    log_ml : float
        Log marginal likelihood at `lam`.
    """

    def __init__(self, grid: WorkingGrid, basis: SplineBasis, coef: FloatArray, intercept: float, lam: float, sigma2: float, log_ml: float) -> None:
        self.grid = grid
        self.basis = basis
        self.coef = coef
        self.intercept = intercept
        self.lam = lam
        self.sigma2 = sigma2
        self.log_ml = log_ml

    def beta(self, t: FloatArray | None = None) -> FloatArray:
        """Coefficient function at `t` (the grid by default)."""
        t = self.grid.t if t is None else np.asarray(t, dtype=float)
        return bspline_eval(self.basis, t) @ self.coef

    def predict(self, trajectories: FloatArray) -> FloatArray:
        """Responses predicted for dense curves on the grid."""
        return self.intercept + flm_design(trajectories, self.grid, self.basis) @ self.coef

    def surface(self, x: FloatArray, t: FloatArray) -> FloatArray:
        """Equivalent FGAM surface ``α/|T| + x β(t)`` on the grid ``x × t``."""
        x = np.asarray(x, dtype=float)
        return self.intercept / self.grid.span + x[:, None] * self.beta(t)[None, :]

    def __repr__(self) -> str:
        return f"FlmFit(num_basis={self.coef.size}, lam={self.lam:.3g}, sigma2={self.sigma2:.4g})"


def _log_marginal(zz: FloatArray, zy: FloatArray, yy: float, n: int, penalty: FloatArray, lam: float) -> tuple[float, FloatArray, float]:
    """Profiled log marginal likelihood, coefficients and noise variance for one λ."""
    precision = lam * penalty
    eigs = np.linalg.eigvalsh(precision)
    keep = eigs > ZERO_EIGENVALUE_RTOL * max(eigs.max(), 1.0)
    coef, _, log_det_cov = gaussian_from_precision(zz + precision, zy)
    dof = n - 1
    # floored for exact fits
    sigma2 = max((yy - zy @ coef) / dof, SIGMA2_FLOOR * max(yy / dof, 1.0))
    log_ml = -0.5 * dof * np.log(sigma2) + 0.5 * (np.sum(np.log(eigs[keep])) + log_det_cov)
    return float(log_ml), coef, float(sigma2)


def flm_baseline(
    trajectories: FloatArray,
    y: FloatArray,
    grid: WorkingGrid,
    kt: int = 10,
    dt: int = 2,
    lambdas: Sequence[float] | None = None,
    kappa: float = 1e-6,
) -> FlmFit:
    """
    Fit the functional linear model by penalized least squares.

    The coefficients of ``β`` get the Gaussian prior with precision
    ``λ (DᵀD + κI) / σ²``, the intercept is flat, and ``λ`` maximizes the marginal
    likelihood (``σ²`` profiled out) over the candidate grid.

    Parameters
    ----------
    trajectories : numpy.ndarray
        Dense curves on the grid, shape ``(N, T)``; true or imputed.
    y : numpy.ndarray
        Responses of length ``N``.
    grid : WorkingGrid
        Quadrature grid.
    kt : int, default: 10
        Number of cubic B-splines for ``β``.
    dt : int, default: 2
        Difference-penalty order.
    lambdas : sequence of float, optional
        Positive candidates; defaults to ``logspace(-6, 6, 49)``.
    kappa : float, default: 1e-6
        Ridge added to the penalty; zero leaves the penalty null space unpenalized.

    Returns
    -------
    FlmFit
        Fit at the selected smoothing parameter.

    Raises
    ------
    ValueError
        If the inputs are inconsistent or a candidate is not positive.
    FittingError
        If the penalized normal equations are singular for every candidate, which
        happens for a rank-deficient design with ``kappa = 0``.
    """
    y = np.asarray(y, dtype=float)
    lambdas = np.logspace(-6, 6, 49) if lambdas is None else np.asarray(lambdas, dtype=float)
    if np.any(lambdas <= 0):
        raise ValueError("Invalid lambdas: candidates must be positive.")
    if kappa < 0:
        raise ValueError(f"Invalid kappa: {kappa}. Must be zero or positive.")
    if y.size < 2:
        raise ValueError(f"Invalid y: {y.size} responses. Must have at least 2.")

    basis = SplineBasis.uniform(grid.t[0], grid.t[-1], kt)
    design = flm_design(trajectories, grid, basis)
    if design.shape[0] != y.size:
        raise ValueError(f"Invalid trajectories: {design.shape[0]} rows for {y.size} responses.")
    z_mean, y_mean = design.mean(axis=0), float(y.mean())
    zc, yc = design - z_mean, y - y_mean
    zz, zy, yy = zc.T @ zc, zc.T @ yc, float(yc @ yc)
    penalty = difference_matrix(kt, dt).gram + kappa * np.eye(kt)

    best: tuple[float, FloatArray, float, float] | None = None
    for lam in lambdas:
        try:
            log_ml, coef, sigma2 = _log_marginal(zz, zy, yy, y.size, penalty, float(lam))
        except np.linalg.LinAlgError:
            logger.debug("flm: lambda %s skipped (singular system)", lam)
            continue
        if best is None or log_ml > best[0]:
            best = (log_ml, coef, sigma2, float(lam))
    if best is None:
        raise FittingError("penalized normal equations are singular for every smoothing parameter", "flm")

    log_ml, coef, sigma2, lam = best
    logger.info("flm: lambda %.3g, log marginal likelihood %.4f", lam, log_ml)
    return FlmFit(grid, basis, coef, y_mean - float(z_mean @ coef), lam, sigma2, log_ml)
