"""Gaussian, inverse-gamma and slice-sampling helpers shared by the fitters."""

from __future__ import annotations
import logging
from collections.abc import Callable

import numpy as np
from scipy import linalg
from scipy.special import digamma

from .auxiliary import FloatArray


logger = logging.getLogger(__name__)


def spawn_generators(seed: int, n_streams: int) -> list[np.random.Generator]:
    """
    Independent counter-based random streams derived from one seed.

    Parameters
    ----------
    seed : int
        Root seed.
    n_streams : int
        Number of streams.

    Returns
    -------
    list of numpy.random.Generator
        Philox generators, one per stream, reproducible for a fixed `seed`.
    """
    children = np.random.SeedSequence(seed).spawn(n_streams)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def gaussian_from_precision(precision: FloatArray, rhs: FloatArray) -> tuple[FloatArray, FloatArray, float]:
    """
    Mean, covariance and log-determinant of a Gaussian given in information form.

    Parameters
    ----------
    precision : numpy.ndarray
        Symmetric positive definite precision matrix ``Q``.
    rhs : numpy.ndarray
        Information vector ``h``; the mean is ``Q^{-1} h``.

    Returns
    -------
    tuple of (numpy.ndarray, numpy.ndarray, float)
        Mean, covariance ``Q^{-1}`` and ``log|Q^{-1}|``.

    Raises
    ------
    numpy.linalg.LinAlgError
        If `precision` is not positive definite.
    """
    if precision.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0)), 0.0
    factor = linalg.cho_factor(precision, lower=True)
    mean = linalg.cho_solve(factor, rhs)
    covariance = linalg.cho_solve(factor, np.eye(precision.shape[0]))
    covariance = 0.5 * (covariance + covariance.T)
    log_det_cov = -2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return mean, covariance, log_det_cov


def sample_gaussian_precision(rng: np.random.Generator, precision: FloatArray, rhs: FloatArray) -> tuple[FloatArray, FloatArray]:
    """
    Draw from ``N(Q^{-1} h, Q^{-1})`` using a Cholesky factor of ``Q``.

    Parameters
    ----------
    rng : numpy.random.Generator
        Random stream.
    precision : numpy.ndarray
        Precision matrix ``Q``.
    rhs : numpy.ndarray
        Information vector ``h``.

    Returns
    -------
    tuple of (numpy.ndarray, numpy.ndarray)
        The draw and the conditional mean.

    Raises
    ------
    numpy.linalg.LinAlgError
        If `precision` is not positive definite.
    """
    if precision.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    upper = linalg.cholesky(precision, lower=False)
    mean = linalg.cho_solve((upper, False), rhs)
    noise = linalg.solve_triangular(upper, rng.standard_normal(precision.shape[0]), lower=False)
    return mean + noise, mean


def draw_inverse_gamma(rng: np.random.Generator, shape: float, rate: float) -> float:
    """
    Draw from an inverse-gamma distribution with density proportional to ``x^{-shape-1} exp(-rate/x)``.

    Parameters
    ----------
    rng : numpy.random.Generator
        Random stream.
    shape : float
        Shape parameter.
    rate : float
        Scale (rate of the reciprocal) parameter.

    Returns
    -------
    float
        A strictly positive draw.
    """
    if not (np.isfinite(rate) and rate > 0 and shape > 0):
        raise ValueError(f"Invalid inverse-gamma parameters: shape = {shape}, rate = {rate}. Must be positive.")
    return float(rate / rng.standard_gamma(shape))


def inverse_gamma_moments(shape: float, rate: float) -> tuple[float, float]:
    """
    Expectations of ``1/theta`` and ``log(theta)`` for ``theta ~ IG(shape, rate)``.

    Parameters
    ----------
    shape : float
        Shape parameter ``A``.
    rate : float
        Rate parameter ``B``.

    Returns
    -------
    tuple of (float, float)
        ``A / B`` and ``log(B) - digamma(A)``.
    """
    return shape / rate, float(np.log(rate) - digamma(shape))


def slice_sample_positive(
    log_density: Callable[[float], float],
    x0: float,
    rng: np.random.Generator,
    width: float = 2.0,
    max_doublings: int = 60,
) -> tuple[float, int]:
    """
    One slice-sampling transition for a unimodal density on ``(0, inf)``.

    The bracket starts at ``[0, width]`` and its right end is doubled until it lies
    outside the slice and beyond the current point; proposals are then drawn uniformly
    and the bracket is shrunk towards the current point after each rejection.

    Parameters
    ----------
    log_density : callable
        Unnormalized log-density; must return ``-inf`` for non-positive arguments.
    x0 : float
        Current state, strictly positive.
    rng : numpy.random.Generator
        Random stream.
    width : float, default: 2.0
        Initial right end of the bracket.
    max_doublings : int, default: 60
        Cap on the number of bracket doublings.

    Returns
    -------
    tuple of (float, int)
        New state and the number of doublings used.

    Raises
    ------
    ValueError
        If the log-density at `x0` is not finite.
    """
    log_f0 = log_density(x0)
    if not np.isfinite(log_f0):
        raise ValueError(f"Invalid slice start: log-density at {x0} is {log_f0}.")
    level = log_f0 - rng.standard_exponential()

    left, right = 0.0, width
    doublings = 0
    while (right <= x0 or log_density(right) > level) and doublings < max_doublings:
        right *= 2.0
        doublings += 1
    if doublings == max_doublings:
        logger.warning("Slice bracket reached the doubling cap (%s); right end %s.", max_doublings, right)

    while True:
        proposal = left + rng.uniform() * (right - left)
        if proposal > 0 and log_density(proposal) > level:
            return float(proposal), doublings
        if proposal < x0:
            left = proposal
        else:
            right = proposal
        if right - left <= 1e-300:
            return float(x0), doublings


def batch_means_se(draws: FloatArray, n_batches: int = 50) -> FloatArray:
    """
    Monte Carlo standard error of the mean by non-overlapping batch means.

    Parameters
    ----------
    draws : numpy.ndarray
        Chain of shape ``(S,)`` or ``(S, p)``.
    n_batches : int, default: 50
        Number of batches; reduced when the chain is short.

    Returns
    -------
    numpy.ndarray
        Standard error per column (a 0-d array for one-dimensional input).
    """
    draws = np.asarray(draws, dtype=float)
    n_batches = max(2, min(n_batches, draws.shape[0] // 2))
    size = draws.shape[0] // n_batches
    batches = draws[: size * n_batches].reshape(n_batches, size, *draws.shape[1:]).mean(axis=1)
    return np.asarray(batches.std(axis=0, ddof=1) / np.sqrt(n_batches))
