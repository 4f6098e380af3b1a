"""
Sparse functional principal component analysis.

Estimates the mean curve, the covariance surface, the measurement-error variance, the
eigenpairs and BLUP scores from sparse, noisy observations. Both smoothers are P-splines
with the smoothing parameter chosen by generalized cross-validation.
"""

from __future__ import annotations
import logging
import warnings
from collections.abc import Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from ..helpers.auxiliary import DatasetError, FittingError, FloatArray
from ..helpers.basis import SplineBasis, WorkingGrid, bspline_eval, difference_matrix
from ..helpers.dataset import SparseFunctionalDataset, Subject


logger = logging.getLogger(__name__)

#: Number of pairs per block when accumulating covariance normal equations.
PAIR_CHUNK = 20000


class FpcaOptions:
    """
    Settings of the FPCA initialization.

    Parameters
    ----------
    grid_size : int, default: 50
        Number of working-grid points.
    pve : float, default: 0.99
        Target fraction of variance explained.
    max_components : int, optional
        Upper bound on the number of components.
    mean_basis : int, default: 15
        Cubic B-splines used for the mean and the raw-variance smoothers.
    cov_basis : int, default: 10
        Cubic B-splines per axis of the covariance smoother.
    mean_order : int, default: 2
        Difference-penalty order of the mean smoother.
    cov_order : int, default: 3
        Difference-penalty order of the covariance smoother along both axes.
    lambdas : sequence of float, optional
        Candidate smoothing parameters; defaults to ``logspace(-4, 4, 21)``.
    domain : tuple of float, optional
        Time domain of the working grid; defaults to the pooled observation range.
    n_jobs : int, default: 1
        Threads used for the per-subject BLUP scores.
    """

    def __init__(
        self,
        grid_size: int = 50,
        pve: float = 0.99,
        max_components: int | None = None,
        mean_basis: int = 15,
        cov_basis: int = 10,
        mean_order: int = 2,
        cov_order: int = 3,
        lambdas: Sequence[float] | None = None,
        domain: tuple[float, float] | None = None,
        n_jobs: int = 1,
    ) -> None:
        if grid_size < 2:
            raise ValueError(f"Invalid grid_size: {grid_size}. Must be at least 2.")
        if not 0 < pve <= 1:
            raise ValueError(f"Invalid pve: {pve}. Must be in (0, 1].")
        if max_components is not None and max_components < 1:
            raise ValueError(f"Invalid max_components: {max_components}. Must be at least 1.")
        self.grid_size = grid_size
        self.pve = pve
        self.max_components = max_components
        self.mean_basis = mean_basis
        self.cov_basis = cov_basis
        self.mean_order = mean_order
        self.cov_order = cov_order
        self.lambdas = np.logspace(-4, 4, 21) if lambdas is None else np.asarray(lambdas, dtype=float)
        self.domain = domain
        self.n_jobs = n_jobs

    def working_grid(self, data: SparseFunctionalDataset) -> WorkingGrid:
        """
        Working grid spanning `domain` or the pooled observation range.

        Parameters
        ----------
        data : SparseFunctionalDataset
            Dataset whose observation times must lie inside the grid.

        Returns
        -------
        WorkingGrid
            Equally spaced grid of `grid_size` points.

        Raises
        ------
        DatasetError
            If all observation times coincide or fall outside `domain`.
        """
        lo, hi = data.time_range()
        if self.domain is not None:
            if lo < self.domain[0] or hi > self.domain[1]:
                raise DatasetError(f"Observation times [{lo}, {hi}] outside the domain {self.domain}.")
            lo, hi = self.domain
        if hi <= lo:
            raise DatasetError("Degenerate pooled data: all observation times are identical.")
        return WorkingGrid.uniform(lo, hi, self.grid_size)

    def __repr__(self) -> str:
        return f"FpcaOptions(grid_size={self.grid_size}, pve={self.pve}, max_components={self.max_components})"


class FpcaResult:
    """
    Output of the FPCA initialization, frozen for the downstream fitters.

    Parameters
    ----------
    grid : WorkingGrid
        Working grid.
    mu : numpy.ndarray
        Mean curve on the grid.
    phi : numpy.ndarray
        Eigenfunctions on the grid, shape ``(T, M)``, quadrature-orthonormal.
    nu : numpy.ndarray
        Positive, decreasing eigenvalues of length ``M``.
    sigma_x2 : float
        Measurement-error variance.
    scores : numpy.ndarray
        BLUP scores of the fitting subjects, shape ``(N, M)``.
    pve : float
        Fraction of variance explained by the retained components.
    diagnostics : dict, optional
        Smoothing parameters and warning flags.
    """

    def __init__(
        self,
        grid: WorkingGrid,
        mu: FloatArray,
        phi: FloatArray,
        nu: FloatArray,
        sigma_x2: float,
        scores: FloatArray,
        pve: float = 1.0,
        diagnostics: dict | None = None,
    ) -> None:
        self.grid = grid
        self.mu = np.asarray(mu, dtype=float)
        self.phi = np.asarray(phi, dtype=float).reshape(grid.size, -1)
        self.nu = np.asarray(nu, dtype=float)
        self.sigma_x2 = float(sigma_x2)
        self.scores = np.asarray(scores, dtype=float).reshape(-1, self.nu.size)
        self.pve = float(pve)
        self.diagnostics = {} if diagnostics is None else diagnostics
        if self.sigma_x2 <= 0:
            raise ValueError(f"Invalid sigma_x2: {self.sigma_x2}. Must be positive.")
        if np.any(self.nu <= 0):
            raise ValueError("Invalid nu: eigenvalues must be positive.")

    @property
    def n_components(self) -> int:
        """Number of retained components ``M``."""
        return int(self.nu.size)

    def interpolate(self, times: FloatArray) -> tuple[FloatArray, FloatArray]:
        """
        Mean and eigenfunctions at off-grid times by linear interpolation.

        Parameters
        ----------
        times : numpy.ndarray
            Times inside the grid range.

        Returns
        -------
        tuple of (numpy.ndarray, numpy.ndarray)
            ``mu(times)`` and ``phi(times)`` of shape ``(len(times), M)``.
        """
        times = np.asarray(times, dtype=float)
        mu_i = np.interp(times, self.grid.t, self.mu)
        phi_i = np.column_stack([np.interp(times, self.grid.t, column) for column in self.phi.T]).reshape(times.size, -1)
        return mu_i, phi_i

    def trajectories(self, scores: FloatArray | None = None) -> FloatArray:
        """
        Reconstructed curves ``mu + phi @ xi`` on the grid.

        Parameters
        ----------
        scores : numpy.ndarray, optional
            Score matrix ``(n, M)``; defaults to the BLUP scores.

        Returns
        -------
        numpy.ndarray
            Curves of shape ``(n, T)``.
        """
        scores = self.scores if scores is None else np.atleast_2d(scores)
        return self.mu[None, :] + scores @ self.phi.T

    def blup(self, subject: Subject, sigma_x2: float | None = None) -> FloatArray:
        """
        BLUP scores of a (possibly new) subject.

        Parameters
        ----------
        subject : Subject
            Subject with at least one observation.
        sigma_x2 : float, optional
            Measurement-error variance; defaults to the FPCA estimate.

        Returns
        -------
        numpy.ndarray
            Scores of length ``M``.
        """
        return blup_scores(subject, self.mu, self.phi, self.nu, self.sigma_x2 if sigma_x2 is None else sigma_x2, self.grid)

    def with_scores(self, scores: FloatArray) -> FpcaResult:
        """
        Copy of this result with replaced scores.

        Parameters
        ----------
        scores : numpy.ndarray
            New score matrix.

        Returns
        -------
        FpcaResult
            Result sharing everything but the scores.
        """
        return FpcaResult(self.grid, self.mu, self.phi, self.nu, self.sigma_x2, scores, self.pve, dict(self.diagnostics))

    def __repr__(self) -> str:
        return f"FpcaResult(n_components={self.n_components}, sigma_x2={self.sigma_x2:.4g}, pve={self.pve:.4f})"


def _select_smoothing(
    btb: FloatArray,
    bty: FloatArray,
    yty: float,
    n_obs: int,
    penalty: FloatArray,
    lambdas: FloatArray,
) -> tuple[FloatArray, float]:
    """Penalized least squares from normal equations with the GCV-optimal smoothing parameter."""
    best: tuple[float, FloatArray, float] | None = None
    for lam in lambdas:
        try:
            factor = linalg.cho_factor(btb + lam * penalty, lower=True)
        except linalg.LinAlgError:
            continue
        coef = linalg.cho_solve(factor, bty)
        edf = float(np.trace(linalg.cho_solve(factor, btb)))
        rss = max(yty - 2.0 * coef @ bty + coef @ btb @ coef, 0.0)
        if n_obs - edf <= 0:
            continue
        gcv = n_obs * rss / (n_obs - edf) ** 2
        if best is None or gcv < best[0]:
            best = (gcv, coef, float(lam))
    if best is None:
        raise FittingError("No smoothing parameter gives a well-posed P-spline fit.", module="fpca")
    return best[1], best[2]


def _pspline_curve(times: FloatArray, values: FloatArray, grid: WorkingGrid, num_basis: int, order: int, lambdas: FloatArray) -> tuple[FloatArray, float]:
    basis = SplineBasis.uniform(grid.t[0], grid.t[-1], num_basis)
    design = bspline_eval(basis, np.clip(times, grid.t[0], grid.t[-1]))
    penalty = difference_matrix(num_basis, order).gram
    coef, lam = _select_smoothing(design.T @ design, design.T @ values, float(values @ values), values.size, penalty, lambdas)
    return bspline_eval(basis, grid.t) @ coef, lam


def estimate_mean(data: SparseFunctionalDataset, grid: WorkingGrid | None = None, options: FpcaOptions | None = None) -> FloatArray:
    """
    Penalized-spline fit of the pooled observations.

    Parameters
    ----------
    data : SparseFunctionalDataset
        Dataset to pool.
    grid : WorkingGrid, optional
        Evaluation grid; defaults to ``options.working_grid(data)``.
    options : FpcaOptions, optional
        Smoother settings.

    Returns
    -------
    numpy.ndarray
        Mean curve on the grid.

    Raises
    ------
    DatasetError
        If fewer than two distinct observation times are pooled.
    """
    options = FpcaOptions() if options is None else options
    grid = options.working_grid(data) if grid is None else grid
    times, values = data.pooled()
    if np.unique(times).size < 2:
        raise DatasetError("Degenerate pooled data: need at least two distinct observation times.")
    mean, lam = _pspline_curve(times, values, grid, options.mean_basis, options.mean_order, options.lambdas)
    logger.debug("Mean smoother selected lambda = %s.", lam)
    return mean


def raw_covariances(data: SparseFunctionalDataset, mean: FloatArray, grid: WorkingGrid) -> tuple[FloatArray, FloatArray, FloatArray]:
    """
    All within-subject products of centred observations, diagonal included.

    Parameters
    ----------
    data : SparseFunctionalDataset
        Dataset.
    mean : numpy.ndarray
        Mean curve on the grid, interpolated linearly to the observation times.
    grid : WorkingGrid
        Working grid of `mean`.

    Returns
    -------
    tuple of (numpy.ndarray, numpy.ndarray, numpy.ndarray)
        Times ``s``, times ``t`` and products ``r(s) r(t)`` over every ordered pair.
    """
    s_parts, t_parts, p_parts = [], [], []
    for subject in data.subjects:
        resid = subject.values - np.interp(subject.times, grid.t, mean)
        s_parts.append(np.repeat(subject.times, subject.n_obs))
        t_parts.append(np.tile(subject.times, subject.n_obs))
        p_parts.append(np.outer(resid, resid).ravel())
    return np.concatenate(s_parts), np.concatenate(t_parts), np.concatenate(p_parts)


def smooth_covariance(
    s: FloatArray,
    t: FloatArray,
    products: FloatArray,
    grid: WorkingGrid,
    options: FpcaOptions | None = None,
) -> tuple[FloatArray, float]:
    """
    Tensor-product P-spline fit of the off-diagonal raw covariances.

    Products with ``s == t`` are discarded before fitting.

    Parameters
    ----------
    s, t : numpy.ndarray
        Observation-time pairs.
    products : numpy.ndarray
        Raw covariance products.
    grid : WorkingGrid
        Evaluation grid.
    options : FpcaOptions, optional
        Smoother settings.

    Returns
    -------
    tuple of (numpy.ndarray, float)
        Symmetric surface on grid × grid and the selected smoothing parameter.

    Raises
    ------
    DatasetError
        If no off-diagonal products remain.
    """
    options = FpcaOptions() if options is None else options
    keep = s != t
    s, t, products = s[keep], t[keep], products[keep]
    if products.size == 0:
        raise DatasetError("No subject has two or more observations; the covariance cannot be estimated.")

    k = options.cov_basis
    basis = SplineBasis.uniform(grid.t[0], grid.t[-1], k)
    btb = np.zeros((k * k, k * k))
    bty = np.zeros(k * k)
    for start in range(0, products.size, PAIR_CHUNK):
        block = slice(start, start + PAIR_CHUNK)
        bs = bspline_eval(basis, np.clip(s[block], grid.t[0], grid.t[-1]))
        bt = bspline_eval(basis, np.clip(t[block], grid.t[0], grid.t[-1]))
        rows = (bs[:, :, None] * bt[:, None, :]).reshape(-1, k * k)
        btb += rows.T @ rows
        bty += rows.T @ products[block]
    gram = difference_matrix(k, options.cov_order).gram
    penalty = np.kron(gram, np.eye(k)) + np.kron(np.eye(k), gram)
    coef, lam = _select_smoothing(btb, bty, float(products @ products), products.size, penalty, options.lambdas)

    b_grid = bspline_eval(basis, grid.t)
    surface = b_grid @ coef.reshape(k, k) @ b_grid.T
    return 0.5 * (surface + surface.T), lam


def estimate_covariance(data: SparseFunctionalDataset, mean: FloatArray, grid: WorkingGrid, options: FpcaOptions | None = None) -> FloatArray:
    """
    Smooth covariance surface from the off-diagonal raw covariances.

    Parameters
    ----------
    data : SparseFunctionalDataset
        Dataset.
    mean : numpy.ndarray
        Mean curve on the grid.
    grid : WorkingGrid
        Working grid.
    options : FpcaOptions, optional
        Smoother settings.

    Returns
    -------
    numpy.ndarray
        Symmetric ``(T, T)`` covariance surface.
    """
    surface, lam = smooth_covariance(*raw_covariances(data, mean, grid), grid, options)
    logger.debug("Covariance smoother selected lambda = %s.", lam)
    return surface


def estimate_noise_variance(
    raw_diag: FloatArray,
    smooth_diag: FloatArray,
    grid: WorkingGrid | None = None,
    pooled_variance: float = 1.0,
) -> tuple[float, bool]:
    """
    Measurement-error variance from the middle two-thirds of the diagonal gap.

    The window covers the 1-based grid indices ``T//6 + 1`` to ``T - T//6``.

    Parameters
    ----------
    raw_diag : numpy.ndarray
        Smoothed raw variances on the grid.
    smooth_diag : numpy.ndarray
        Diagonal of the smooth covariance surface.
    grid : WorkingGrid, optional
        Working grid; only its size is checked.
    pooled_variance : float, default: 1.0
        Sample variance of all observations, scaling the positivity floor.

    Returns
    -------
    tuple of (float, bool)
        The estimate and whether it was raised to the floor ``1e-4 * pooled_variance``.
    """
    raw_diag = np.asarray(raw_diag, dtype=float)
    smooth_diag = np.asarray(smooth_diag, dtype=float)
    if raw_diag.shape != smooth_diag.shape or (grid is not None and raw_diag.size != grid.size):
        raise ValueError("Input raw_diag and smooth_diag must have the grid length.")
    size = raw_diag.size
    window = slice(size // 6, size - size // 6)
    value = float(np.mean(raw_diag[window] - smooth_diag[window]))
    floor = 1e-4 * pooled_variance if pooled_variance > 0 else 1e-8
    if value < floor:
        warnings.warn(UserWarning(f"Estimated measurement-error variance {value:.4g} raised to the floor {floor:.4g}."), stacklevel=2)
        return floor, True
    return value, False


def eigendecompose(cov: FloatArray, grid: WorkingGrid, pve: float = 0.99, max_components: int | None = None) -> tuple[FloatArray, FloatArray, float, int]:
    """
    Eigenpairs of a covariance surface under the grid quadrature.

    Parameters
    ----------
    cov : numpy.ndarray
        Symmetric ``(T, T)`` covariance surface.
    grid : WorkingGrid
        Working grid supplying the quadrature weights.
    pve : float, default: 0.99
        Target fraction of the positive spectrum to retain.
    max_components : int, optional
        Upper bound on the number of components.

    Returns
    -------
    tuple of (numpy.ndarray, numpy.ndarray, float, int)
        Eigenvalues ``nu``, eigenfunctions ``phi`` of shape ``(T, M)``, the fraction of
        variance explained, and the number of non-positive eigenvalues dropped.

    Raises
    ------
    FittingError
        If the surface has no positive eigenvalue.
    """
    root_w = np.sqrt(grid.weights)
    values, vectors = np.linalg.eigh(cov * root_w[:, None] * root_w[None, :])
    order = np.argsort(-values, kind="stable")
    values, vectors = values[order], vectors[:, order]
    positive = values > 0
    n_dropped = int(np.count_nonzero(~positive))
    if not positive.any():
        raise FittingError("Covariance surface has no positive eigenvalue.", module="fpca")
    values, vectors = values[positive], vectors[:, positive]

    explained = np.cumsum(values) / values.sum()
    n_components = int(np.searchsorted(explained, pve - 1e-12) + 1)
    if max_components is not None:
        n_components = min(n_components, max_components)
    n_components = min(n_components, values.size)

    phi = vectors[:, :n_components] / root_w[:, None]
    peaks = np.argmax(np.abs(phi), axis=0)
    phi *= np.sign(phi[peaks, np.arange(n_components)])
    return values[:n_components], phi, float(explained[n_components - 1]), n_dropped


def score_posterior(phi_i: FloatArray, resid: FloatArray, nu: FloatArray, sigma_x2: float) -> tuple[FloatArray, FloatArray]:
    """
    Gaussian conditional of scores given sparse observations.

    Parameters
    ----------
    phi_i : numpy.ndarray
        Eigenfunctions at the subject's times, shape ``(n_i, M)``.
    resid : numpy.ndarray
        Centred observations ``x - mu``.
    nu : numpy.ndarray
        Eigenvalues.
    sigma_x2 : float
        Measurement-error variance.

    Returns
    -------
    tuple of (numpy.ndarray, numpy.ndarray)
        Mean ``S phiᵀ r / sigma_x2`` and covariance ``S = (phiᵀphi / sigma_x2 + diag(1/nu))^{-1}``.
    """
    precision = phi_i.T @ phi_i / sigma_x2 + np.diag(1.0 / nu)
    factor = linalg.cho_factor(precision, lower=True)
    cov = linalg.cho_solve(factor, np.eye(nu.size))
    return linalg.cho_solve(factor, phi_i.T @ resid / sigma_x2), 0.5 * (cov + cov.T)


def blup_scores(subject: Subject, mu: FloatArray, phi: FloatArray, nu: FloatArray, sigma_x2: float, grid: WorkingGrid) -> FloatArray:
    """
    Best linear unbiased prediction of one subject's principal component scores.

    Parameters
    ----------
    subject : Subject
        Subject with at least one observation.
    mu : numpy.ndarray
        Mean curve on the grid.
    phi : numpy.ndarray
        Eigenfunctions on the grid, shape ``(T, M)``.
    nu : numpy.ndarray
        Eigenvalues.
    sigma_x2 : float
        Measurement-error variance, strictly positive.
    grid : WorkingGrid
        Working grid.

    Returns
    -------
    numpy.ndarray
        Scores ``diag(nu) phi_iᵀ (phi_i diag(nu) phi_iᵀ + sigma_x2 I)^{-1} (x - mu)``.
    """
    if sigma_x2 <= 0:
        raise ValueError(f"Invalid sigma_x2: {sigma_x2}. Must be positive.")
    phi = np.asarray(phi, dtype=float).reshape(grid.size, -1)
    phi_i = np.column_stack([np.interp(subject.times, grid.t, column) for column in phi.T]).reshape(subject.n_obs, -1)
    resid = subject.values - np.interp(subject.times, grid.t, mu)
    return score_posterior(phi_i, resid, np.asarray(nu, dtype=float), sigma_x2)[0]


def pace_init(data: SparseFunctionalDataset, options: FpcaOptions | None = None) -> FpcaResult:
    """
    Run the full FPCA initialization.

    Parameters
    ----------
    data : SparseFunctionalDataset
        Dataset.
    options : FpcaOptions, optional
        Settings.

    Returns
    -------
    FpcaResult
        Mean, eigenpairs, noise variance and BLUP scores of the fitting subjects.
    """
    options = FpcaOptions() if options is None else options
    grid = options.working_grid(data)
    times, values = data.pooled()
    mean = estimate_mean(data, grid, options)

    s, t, products = raw_covariances(data, mean, grid)
    cov, cov_lambda = smooth_covariance(s, t, products, grid, options)
    on_diag = s == t
    raw_diag, _ = _pspline_curve(s[on_diag], products[on_diag], grid, options.mean_basis, options.mean_order, options.lambdas)
    sigma_x2, floored = estimate_noise_variance(raw_diag, np.diag(cov), grid, float(np.var(values)))

    nu, phi, pve, n_dropped = eigendecompose(cov, grid, options.pve, options.max_components)
    if n_dropped:
        warnings.warn(UserWarning(f"Covariance surface is not positive definite: {n_dropped} eigenvalue(s) dropped."), stacklevel=2)

    scores = Parallel(n_jobs=options.n_jobs, prefer="threads")(delayed(blup_scores)(subj, mean, phi, nu, sigma_x2, grid) for subj in data.subjects)
    diagnostics = {
        "cov_lambda": cov_lambda,
        "n_negative_eigenvalues": n_dropped,
        "sigma_x2_floored": floored,
        "ill_conditioned": bool(n_dropped or floored),
    }
    result = FpcaResult(grid, mean, phi, nu, sigma_x2, np.array(scores).reshape(data.n_subjects, -1), pve, diagnostics)
    logger.info("FPCA retained %s component(s), pve = %.4f, sigma_x2 = %.4g.", result.n_components, pve, sigma_x2)
    return result
