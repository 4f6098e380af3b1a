"""
Mean-field variational Bayes for the FGAM with sparse functional covariates.

Coordinate ascent over the factors of the scores (Laplace approximations with second order
Taylor moments of the design rows), the offset and surface coefficients, the smoothing
parameters (generalized Gauss-Laguerre quadrature) and the two variances, monitored by an
explicit evidence lower bound.
"""

from __future__ import annotations
import logging
import time
from collections.abc import Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import linalg, stats
from scipy.special import digamma, gammaln, roots_genlaguerre

from ..helpers.auxiliary import FittingError, FloatArray
from ..helpers.basis import bspline_eval
from ..helpers.dataset import SparseFunctionalDataset, Subject
from ..helpers.statistics import gaussian_from_precision, inverse_gamma_moments
from .fpca import FpcaResult
from .model import BasisOptions, FgamModel, Hyperparameters, SubjectTerms


logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))

BOUND_COMPONENTS = (
    "response",
    "trajectory",
    "score_prior",
    "offset_prior",
    "beta_prior",
    "delta_prior",
    "lambda_prior",
    "variance_prior",
    "gaussian_entropy",
    "scale_entropy",
)


class LaguerreRule:
    """
    Generalized Gauss-Laguerre rule for the weight ``x^alpha exp(-x)`` on ``(0, inf)``.

    Parameters
    ----------
    nodes : numpy.ndarray
        Positive nodes.
    weights : numpy.ndarray
        Positive weights.
    alpha : float
        Exponent of the weight function.
    """

    def __init__(self, nodes: FloatArray, weights: FloatArray, alpha: float) -> None:
        self.nodes = nodes
        self.weights = weights
        self.alpha = alpha

    @property
    def size(self) -> int:
        """Number of nodes ``G``."""
        return int(self.nodes.size)

    def __repr__(self) -> str:
        return f"LaguerreRule(size={self.size}, alpha={self.alpha})"


def gauss_laguerre(size: int, alpha: float) -> LaguerreRule:
    """
    Nodes and weights of the generalized Gauss-Laguerre rule.

    Parameters
    ----------
    size : int
        Number of nodes, at least 1.
    alpha : float
        Exponent, greater than -1.

    Returns
    -------
    LaguerreRule
        Rule exact for polynomials up to degree ``2 * size - 1``.

    Raises
    ------
    ValueError
        If `size` < 1 or `alpha` <= -1.
    """
    if size < 1:
        raise ValueError(f"Invalid size: {size}. Must be at least 1.")
    if alpha <= -1:
        raise ValueError(f"Invalid alpha: {alpha}. Must be greater than -1.")
    nodes, weights = roots_genlaguerre(size, alpha)
    return LaguerreRule(np.asarray(nodes, dtype=float), np.asarray(weights, dtype=float), float(alpha))


class LambdaFactor:
    """
    Variational factor of one smoothing parameter, summarized by its moments.

    Parameters
    ----------
    mean : float
        ``E[lambda]``.
    log_mean : float
        ``E[log lambda]``.
    entropy : float
        Differential entropy of the factor.
    rate : float
        Rate of the Gamma kernel of the factor.
    log_norm : float
        Log normalizing constant of the unnormalized factor.
    """

    def __init__(self, mean: float, log_mean: float, entropy: float, rate: float, log_norm: float) -> None:
        self.mean = mean
        self.log_mean = log_mean
        self.entropy = entropy
        self.rate = rate
        self.log_norm = log_norm

    @classmethod
    def gamma(cls, shape: float, rate: float) -> LambdaFactor:
        """Gamma factor, used before the first update."""
        dist = stats.gamma(shape, scale=1.0 / rate)
        log_norm = float(gammaln(shape) - shape * np.log(rate))
        return cls(float(dist.mean()), float(digamma(shape) - np.log(rate)), float(dist.entropy()), rate, log_norm)

    def __repr__(self) -> str:
        return f"LambdaFactor(mean={self.mean:.6g}, rate={self.rate:.6g})"


def lambda_factor(rule: LaguerreRule, rate: float, psi_axis: FloatArray, other: FloatArray) -> LambdaFactor:
    """
    Factor ``q(lambda) ∝ exp(½ Σ log(lambda ψ + other)) lambda^alpha exp(-rate lambda)``.

    The substitution ``x = rate * lambda`` matches the Gamma kernel to the rule's weight;
    the remaining factor is evaluated in log space relative to its maximum over the nodes.

    Parameters
    ----------
    rule : LaguerreRule
        Quadrature rule with ``alpha = a_l + 1``.
    rate : float
        ``b_l + ½ (tr(Ψ Σ_δ) + μ_δᵀ Ψ μ_δ)``.
    psi_axis : numpy.ndarray
        Penalty factor of the updated axis.
    other : numpy.ndarray
        Other smoothing parameter's mean times its penalty factor.

    Returns
    -------
    LambdaFactor
        Mean, expected log, entropy and normalizer of the factor.

    Raises
    ------
    FittingError
        If the log-determinant term is not finite at any node.
    """
    lam = rule.nodes / rate
    h = 0.5 * np.sum(np.log(lam[:, None] * psi_axis[None, :] + other[None, :]), axis=1)
    h_max = float(np.max(h))
    if not np.isfinite(h_max):
        raise FittingError("Smoothing-parameter quadrature underflows at every node.", module="vb")
    weights = rule.weights * np.exp(h - h_max)
    total = float(weights.sum())
    mean = float(weights @ lam / total)
    log_mean = float(weights @ np.log(lam) / total)
    h_mean = float(weights @ h / total)
    log_norm = -(rule.alpha + 1.0) * np.log(rate) + h_max + np.log(total)
    entropy = log_norm - h_mean - rule.alpha * log_mean + rate * mean
    return LambdaFactor(mean, log_mean, float(entropy), rate, float(log_norm))


class VbConfig:
    """
    Variational fitter settings.

    Parameters
    ----------
    tol : float, default: 1e-6
        Relative change of the lower bound declaring convergence.
    max_iter : int, default: 200
        Maximum number of sweeps.
    laguerre_points : int, default: 25
        Nodes of the smoothing-parameter quadrature.
    hyper : Hyperparameters, optional
        Prior hyperparameters.
    basis : BasisOptions, optional
        Surface basis settings.
    newton_max_iter : int, default: 50
        Newton iterations per score mode.
    newton_tol : float, default: 1e-8
        Gradient sup-norm declaring a mode.
    max_halvings : int, default: 30
        Step halvings in the backtracking line search.
    update_scores : bool, default: True
        If False, scores stay at the FPCA values with no spread.
    update_lambdas : bool, default: True
        If False, the smoothing-parameter factors keep their initial values.
    n_jobs : int, default: 1
        Threads for the per-subject Laplace updates.
    """

    def __init__(
        self,
        tol: float = 1e-6,
        max_iter: int = 200,
        laguerre_points: int = 25,
        hyper: Hyperparameters | None = None,
        basis: BasisOptions | None = None,
        newton_max_iter: int = 50,
        newton_tol: float = 1e-8,
        max_halvings: int = 30,
        update_scores: bool = True,
        update_lambdas: bool = True,
        n_jobs: int = 1,
    ) -> None:
        if tol <= 0:
            raise ValueError(f"Invalid tol: {tol}. Must be positive.")
        if max_iter < 1:
            raise ValueError(f"Invalid max_iter: {max_iter}. Must be at least 1.")
        if laguerre_points < 1:
            raise ValueError(f"Invalid laguerre_points: {laguerre_points}. Must be at least 1.")
        self.tol = tol
        self.max_iter = max_iter
        self.laguerre_points = laguerre_points
        self.hyper = Hyperparameters() if hyper is None else hyper
        self.basis = BasisOptions() if basis is None else basis
        self.newton_max_iter = newton_max_iter
        self.newton_tol = newton_tol
        self.max_halvings = max_halvings
        self.update_scores = update_scores
        self.update_lambdas = update_lambdas
        self.n_jobs = n_jobs

    def __repr__(self) -> str:
        return f"VbConfig(tol={self.tol}, max_iter={self.max_iter}, laguerre_points={self.laguerre_points})"


class LaplaceResult:
    """
    Gaussian approximation of one subject's score factor and the implied design-row moments.

    Parameters
    ----------
    mode : numpy.ndarray
        Mode ``xi_0``.
    precision : numpy.ndarray
        Negative Hessian at the mode (regularized if needed).
    cov : numpy.ndarray
        Inverse of `precision`.
    row : numpy.ndarray
        Design row at the mode.
    eb : numpy.ndarray
        Second order Taylor mean of the design row.
    ebb : numpy.ndarray
        Second order Taylor second moment of the design row.
    regularized : bool
        Whether the precision had to be shifted to become positive definite.
    n_clamped : int
        Clamped trajectory values at the mode.
    """

    def __init__(
        self,
        mode: FloatArray,
        precision: FloatArray,
        cov: FloatArray,
        row: FloatArray,
        eb: FloatArray,
        ebb: FloatArray,
        regularized: bool,
        n_clamped: int,
    ) -> None:
        self.mode = mode
        self.precision = precision
        self.cov = cov
        self.row = row
        self.eb = eb
        self.ebb = ebb
        self.regularized = regularized
        self.n_clamped = n_clamped


class ScoreObjective:
    """
    Log of the optimal score density of one subject, up to a constant.

    ``f(xi) = mu_s [e bᵀμ - ½ (bᵀμ)² - ½ bᵀΣb] + mu_x rᵀΦ xi - ½ xiᵀ(mu_x ΦᵀΦ + diag(1/nu)) xi``,
    where ``b`` is the design row of the trajectory ``mu + phi xi``.

    Parameters
    ----------
    model : FgamModel
        The model.
    term : SubjectTerms
        The subject's FPCA quantities.
    mu_theta : numpy.ndarray
        Mean of the surface coefficients.
    sigma_theta : numpy.ndarray
        Covariance of the surface coefficients.
    target : float
        Response minus expected offset, ``y_i - u_iᵀ μ_η0``.
    mu_inv_sigma2 : float
        ``E[1/sigma^2]``; zero disables the response term.
    mu_inv_sigma_x2 : float
        ``E[1/sigma_x^2]``.
    """

    def __init__(
        self,
        model: FgamModel,
        term: SubjectTerms,
        mu_theta: FloatArray,
        sigma_theta: FloatArray,
        target: float,
        mu_inv_sigma2: float,
        mu_inv_sigma_x2: float,
    ) -> None:
        self.model = model
        self.mu_theta = mu_theta
        self.sigma_theta = sigma_theta
        self.target = target
        self.mu_s = mu_inv_sigma2
        self.linear = mu_inv_sigma_x2 * term.phi_resid
        self.quadratic = mu_inv_sigma_x2 * term.phi_gram + np.diag(1.0 / model.fpca.nu)

    def evaluate(self, xi: FloatArray) -> tuple[float, FloatArray, FloatArray]:
        """
        Value, gradient and Hessian at `xi`.

        Parameters
        ----------
        xi : numpy.ndarray
            Scores.

        Returns
        -------
        tuple of (float, numpy.ndarray, numpy.ndarray)
            ``f(xi)``, its gradient and its Hessian.
        """
        row, jac, hess, _ = self.model.design.row_derivatives(self.model.trajectory(xi), self.model.fpca.phi)
        return self._evaluate(xi, row, jac, hess)

    def _evaluate(self, xi: FloatArray, row: FloatArray, jac: FloatArray, hess: FloatArray) -> tuple[float, FloatArray, FloatArray]:
        fit = float(row @ self.mu_theta)
        spread = self.sigma_theta @ row
        resid = self.target - fit
        value = self.mu_s * (self.target * fit - 0.5 * fit**2 - 0.5 * float(row @ spread)) + self.linear @ xi - 0.5 * xi @ self.quadratic @ xi
        j_mu = jac @ self.mu_theta
        grad = self.mu_s * (j_mu * resid - jac @ spread) + self.linear - self.quadratic @ xi
        hessian = self.mu_s * (hess @ self.mu_theta * resid - np.outer(j_mu, j_mu) - hess @ spread - jac @ self.sigma_theta @ jac.T) - self.quadratic
        return value, grad, 0.5 * (hessian + hessian.T)

    def value(self, xi: FloatArray) -> float:
        """Objective value only."""
        row, _ = self.model.design.row(self.model.trajectory(xi))
        fit = float(row @ self.mu_theta)
        return float(
            self.mu_s * (self.target * fit - 0.5 * fit**2 - 0.5 * row @ self.sigma_theta @ row) + self.linear @ xi - 0.5 * xi @ self.quadratic @ xi
        )


def taylor_moments(row: FloatArray, jac: FloatArray, hess: FloatArray, cov: FloatArray) -> tuple[FloatArray, FloatArray]:
    """
    Second order Taylor mean and second moment of a design row under Gaussian scores.

    Parameters
    ----------
    row : numpy.ndarray
        Design row ``b0`` at the mean.
    jac : numpy.ndarray
        First derivatives, shape ``(M, K)``.
    hess : numpy.ndarray
        Second derivatives, shape ``(M, M, K)``.
    cov : numpy.ndarray
        Score covariance.

    Returns
    -------
    tuple of (numpy.ndarray, numpy.ndarray)
        ``E[b] = b0 + ½ v`` and ``E[bbᵀ] = b0b0ᵀ + ½ (b0vᵀ + vb0ᵀ) + JᵀCJ`` with
        ``v = Σ_mn C_mn ∂²b/∂ξ_m∂ξ_n``.
    """
    v = np.einsum("mnk,mn->k", hess, cov)
    cross = np.outer(row, v)
    ebb = np.outer(row, row) + 0.5 * (cross + cross.T) + jac.T @ cov @ jac
    return row + 0.5 * v, 0.5 * (ebb + ebb.T)


def laplace_mode(objective: ScoreObjective, start: FloatArray, config: VbConfig) -> LaplaceResult:
    """
    Newton search for the mode of a score objective and its Laplace approximation.

    Newton steps use backtracking (step halving); if the negative Hessian is not positive
    definite or no Newton step improves the objective, gradient ascent with backtracking
    is used instead.

    Parameters
    ----------
    objective : ScoreObjective
        Objective to maximize.
    start : numpy.ndarray
        Starting scores.
    config : VbConfig
        Iteration caps and tolerances.

    Returns
    -------
    LaplaceResult
        Mode, precision and Taylor moments.
    """
    model = objective.model
    xi = np.array(start, dtype=float)
    value, grad, hessian = objective.evaluate(xi)
    for _ in range(config.newton_max_iter):
        if np.max(np.abs(grad)) < config.newton_tol:
            break
        directions = []
        try:
            directions.append(linalg.solve(-hessian, grad, assume_a="pos"))
        except (linalg.LinAlgError, ValueError):
            pass
        directions.append(grad / max(1.0, float(np.max(np.abs(grad)))))
        moved = False
        for direction in directions:
            step = 1.0
            for _ in range(config.max_halvings + 1):
                candidate = xi + step * direction
                candidate_value = objective.value(candidate)
                if candidate_value >= value:
                    xi, moved = candidate, True
                    break
                step *= 0.5
            if moved:
                break
        if not moved:
            logger.debug("Laplace mode search stalled with gradient norm %.3g.", np.max(np.abs(grad)))
            break
        value, grad, hessian = objective.evaluate(xi)

    row, jac, hess, n_clamped = model.design.row_derivatives(model.trajectory(xi), model.fpca.phi)
    precision = -hessian
    regularized = False
    try:
        linalg.cholesky(precision)
    except linalg.LinAlgError:
        eigenvalues = np.linalg.eigvalsh(precision)
        shift = -eigenvalues[0] + 1e-6 * max(1.0, abs(eigenvalues[-1]))
        precision = precision + shift * np.eye(xi.size)
        regularized = True
        logger.warning("Laplace precision not positive definite; regularized by %.3g.", shift)
    cov = np.linalg.inv(precision)
    cov = 0.5 * (cov + cov.T)
    eb, ebb = taylor_moments(row, jac, hess, cov)
    return LaplaceResult(xi, precision, cov, row, eb, ebb, regularized, n_clamped)


class VbState:
    """
    Parameters of all variational factors.

    Parameters
    ----------
    model : FgamModel
        The model.
    config : VbConfig
        Fitter settings.

    Notes
    -----
    Initialization: zero means, identity covariances, unit inverse-gamma rates and
    smoothing-parameter factors with unit mean. Score modes start at the FPCA scores.
    """

    def __init__(self, model: FgamModel, config: VbConfig) -> None:
        hyper = model.hyper
        n, m = model.n_subjects, model.fpca.n_components
        k = model.reparam.num_coefficients
        self.model = model
        self.mu_eta0 = np.zeros(model.n_offsets)
        self.sigma_eta0 = np.eye(model.n_offsets)
        self.mu_beta = np.zeros(model.reparam.n_null)
        self.sigma_beta = np.eye(model.reparam.n_null)
        self.mu_delta = np.zeros(model.reparam.n_penalized)
        self.sigma_delta = np.eye(model.reparam.n_penalized)
        shape = hyper.a_l + 2.0
        self.q_lambda_x = LambdaFactor.gamma(shape, shape)
        self.q_lambda_t = LambdaFactor.gamma(shape, shape)
        self.a_sigma2 = hyper.a_s + n / 2.0
        self.b_sigma2 = 1.0
        self.a_sigma_x2 = hyper.a_x + model.total_obs / 2.0
        self.b_sigma_x2 = 1.0

        self.modes = model.fpca.scores.copy()
        self.covs = np.zeros((n, m, m))
        self.eb = np.zeros((n, k))
        self.ebb = np.zeros((n, k, k))
        self.regularized = np.zeros(n, dtype=bool)
        self.clamped = np.zeros(n, dtype=int)
        if not config.update_scores:
            rows, _ = model.design.rows(model.fpca.trajectories(self.modes))
            self.eb = rows
            self.ebb = np.einsum("ik,il->ikl", rows, rows)

        self.bound_trace: list[float] = []
        self.converged = False
        self.iterations = 0
        self.elapsed = 0.0

    @property
    def mu_lambda_x(self) -> float:
        """``E[lambda_x]``."""
        return self.q_lambda_x.mean

    @property
    def mu_lambda_t(self) -> float:
        """``E[lambda_t]``."""
        return self.q_lambda_t.mean

    @property
    def mu_inv_sigma2(self) -> float:
        """``E[1/sigma^2]``."""
        return self.a_sigma2 / self.b_sigma2

    @property
    def mu_inv_sigma_x2(self) -> float:
        """``E[1/sigma_x^2]``."""
        return self.a_sigma_x2 / self.b_sigma_x2

    def mu_theta(self) -> FloatArray:
        """Mean of the surface coefficients ``T (μ_β, μ_δ)``."""
        return self.model.reparam.reconstruct_theta(self.mu_beta, self.mu_delta)

    def sigma_theta(self) -> FloatArray:
        """Covariance of the surface coefficients ``T blockdiag(Σ_β, Σ_δ) Tᵀ``."""
        reparam = self.model.reparam
        return reparam.t0 @ self.sigma_beta @ reparam.t0.T + reparam.tp @ self.sigma_delta @ reparam.tp.T

    def fitted(self) -> FloatArray:
        """Variational mean of the linear predictor of every subject."""
        return self.model.offsets @ self.mu_eta0 + self.eb @ self.mu_theta()

    def trajectories(self) -> FloatArray:
        """Curves at the score modes on the working grid."""
        return self.model.fpca.trajectories(self.modes)

    def surface(self, x: FloatArray, t: FloatArray) -> tuple[FloatArray, FloatArray]:
        """
        Variational mean and pointwise standard deviation of the surface.

        Parameters
        ----------
        x : numpy.ndarray
            Trajectory-value axis.
        t : numpy.ndarray
            Time axis.

        Returns
        -------
        tuple of (numpy.ndarray, numpy.ndarray)
            Arrays of shape ``(len(x), len(t))``.
        """
        design = self.model.design
        mean = design.surface(self.mu_theta(), x, t)
        bx = bspline_eval(design.basis_x, design.basis_x.clamp(x)[0])
        bt = bspline_eval(design.basis_t, t)
        kx, kt = design.basis_x.num_basis, design.basis_t.num_basis
        cov = self.sigma_theta().reshape(kx, kt, kx, kt)
        var = np.einsum("aj,bk,jkil,ai,bl->ab", bx, bt, cov, bx, bt, optimize=True)
        return mean, np.sqrt(np.clip(var, 0.0, None))

    def __repr__(self) -> str:
        bound = self.bound_trace[-1] if self.bound_trace else float("nan")
        return f"VbState(iterations={self.iterations}, converged={self.converged}, bound={bound:.6g})"


def laplace_update_scores(state: VbState, i: int, config: VbConfig, mu_theta: FloatArray, sigma_theta: FloatArray) -> VbState:
    """
    Laplace update of one subject's score factor.

    Parameters
    ----------
    state : VbState
        Current state; row `i` of the score quantities is modified in place.
    i : int
        Subject position.
    config : VbConfig
        Fitter settings.
    mu_theta : numpy.ndarray
        Current surface-coefficient mean.
    sigma_theta : numpy.ndarray
        Current surface-coefficient covariance.

    Returns
    -------
    VbState
        The updated state.
    """
    model = state.model
    target = model.y[i] - (model.offsets[i] @ state.mu_eta0 if model.n_offsets else 0.0)
    objective = ScoreObjective(model, model.terms[i], mu_theta, sigma_theta, target, state.mu_inv_sigma2, state.mu_inv_sigma_x2)
    result = laplace_mode(objective, state.modes[i], config)
    state.modes[i] = result.mode
    state.covs[i] = result.cov
    state.eb[i] = result.eb
    state.ebb[i] = result.ebb
    state.regularized[i] = result.regularized
    state.clamped[i] = result.n_clamped
    return state


def update_coefficient_densities(state: VbState) -> VbState:
    """
    Update the offset, unpenalized and penalized coefficient factors in turn.

    Parameters
    ----------
    state : VbState
        Current state, modified in place.

    Returns
    -------
    VbState
        The updated state.

    Raises
    ------
    numpy.linalg.LinAlgError
        If a factor precision is not positive definite.
    """
    model = state.model
    hyper, reparam = model.hyper, model.reparam
    mu_s = state.mu_inv_sigma2
    sum_ebb = state.ebb.sum(axis=0)

    if model.n_offsets:
        u = model.offsets
        precision = mu_s * u.T @ u + np.eye(model.n_offsets) / hyper.sigma_eta2
        state.mu_eta0, state.sigma_eta0, _ = gaussian_from_precision(precision, mu_s * u.T @ (model.y - state.eb @ state.mu_theta()))

    target = state.eb.T @ (model.y - model.offsets @ state.mu_eta0)
    t0, tp = reparam.t0, reparam.tp
    precision = mu_s * t0.T @ sum_ebb @ t0 + np.eye(reparam.n_null) / hyper.sigma_beta2
    state.mu_beta, state.sigma_beta, _ = gaussian_from_precision(precision, mu_s * t0.T @ (target - sum_ebb @ tp @ state.mu_delta))
    precision = mu_s * tp.T @ sum_ebb @ tp + np.diag(reparam.precision(state.mu_lambda_x, state.mu_lambda_t))
    state.mu_delta, state.sigma_delta, _ = gaussian_from_precision(precision, mu_s * tp.T @ (target - sum_ebb @ t0 @ state.mu_beta))
    return state


def update_q_lambda(state: VbState, axis: str, rule: LaguerreRule) -> VbState:
    """
    Update the factor of ``lambda_x`` or ``lambda_t`` by quadrature.

    Parameters
    ----------
    state : VbState
        Current state, modified in place.
    axis : {"x", "t"}
        Smoothing parameter to update.
    rule : LaguerreRule
        Rule with ``alpha = a_l + 1``.

    Returns
    -------
    VbState
        The updated state.
    """
    reparam = state.model.reparam
    if axis == "x":
        psi, other = reparam.psi_x, state.mu_lambda_t * reparam.psi_t
    elif axis == "t":
        psi, other = reparam.psi_t, state.mu_lambda_x * reparam.psi_x
    else:
        raise ValueError(f"Invalid axis: {axis}. Must be 'x' or 't'.")
    rate = state.model.hyper.b_l + 0.5 * float(psi @ (np.diag(state.sigma_delta) + state.mu_delta**2))
    factor = lambda_factor(rule, rate, psi, other)
    if axis == "x":
        state.q_lambda_x = factor
    else:
        state.q_lambda_t = factor
    return state


def expected_response_ss(state: VbState) -> float:
    """``E_q ||y - U η0 - B θ||^2`` under the factorized approximation."""
    model = state.model
    mu_theta, sigma_theta = state.mu_theta(), state.sigma_theta()
    resid = model.y - model.offsets @ state.mu_eta0 - state.eb @ mu_theta
    sum_ebb = state.ebb.sum(axis=0)
    spread = sum_ebb - state.eb.T @ state.eb
    total = resid @ resid + np.trace(model.offsets.T @ model.offsets @ state.sigma_eta0)
    total += np.sum(sum_ebb * sigma_theta) + mu_theta @ spread @ mu_theta
    return float(total)


def expected_trajectory_ss(state: VbState) -> float:
    """``E_q Σ_i ||x_i - mu_i - Φ_i ξ_i||^2`` at the Laplace approximations."""
    model = state.model
    total = model.x_residual_ss(state.modes)
    total += sum(float(np.sum(term.phi_gram * cov)) for term, cov in zip(model.terms, state.covs, strict=True))
    return float(total)


def update_q_variances(state: VbState) -> VbState:
    """
    Update the measurement-error then the response variance factor.

    Parameters
    ----------
    state : VbState
        Current state, modified in place.

    Returns
    -------
    VbState
        The updated state.

    Raises
    ------
    FittingError
        If a rate is not positive.
    """
    hyper = state.model.hyper
    state.b_sigma_x2 = hyper.b_x + 0.5 * expected_trajectory_ss(state)
    state.b_sigma2 = hyper.b_s + 0.5 * expected_response_ss(state)
    if not (state.b_sigma_x2 > 0 and state.b_sigma2 > 0):
        raise FittingError(f"Non-positive variance rate ({state.b_sigma_x2}, {state.b_sigma2}).", module="vb")
    return state


def _gaussian_entropy(cov: FloatArray) -> float:
    if cov.shape[0] == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(cov)
    return 0.5 * cov.shape[0] * (1.0 + LOG_2PI) + 0.5 * logdet if sign > 0 else -np.inf


def _inverse_gamma_entropy(shape: float, rate: float) -> float:
    return float(shape + np.log(rate) + gammaln(shape) - (1.0 + shape) * digamma(shape))


def bound_components(state: VbState, scores_fixed: bool = False) -> dict[str, float]:
    """
    The ten components of the evidence lower bound.

    The smoothing parameters enter the penalty normalizer through the plug-in
    ``log|E[lambda_x] Ψ_x + E[lambda_t] Ψ_t|``.

    Parameters
    ----------
    state : VbState
        Current state.
    scores_fixed : bool, default: False
        If True, the score factors are point masses and carry no entropy.

    Returns
    -------
    dict of str to float
        Components keyed by :py:data:`BOUND_COMPONENTS`.
    """
    model = state.model
    hyper, reparam, nu = model.hyper, model.reparam, model.fpca.nu
    n, m = model.n_subjects, model.fpca.n_components
    inv_s2, log_s2 = inverse_gamma_moments(state.a_sigma2, state.b_sigma2)
    inv_x2, log_x2 = inverse_gamma_moments(state.a_sigma_x2, state.b_sigma_x2)
    lambda_x, lambda_t = state.q_lambda_x, state.q_lambda_t
    penalty = reparam.precision(lambda_x.mean, lambda_t.mean)

    components = {
        "response": -0.5 * n * (LOG_2PI + log_s2) - 0.5 * inv_s2 * expected_response_ss(state),
        "trajectory": -0.5 * model.total_obs * (LOG_2PI + log_x2) - 0.5 * inv_x2 * expected_trajectory_ss(state),
        "score_prior": -0.5 * n * (m * LOG_2PI + np.sum(np.log(nu)))
        - 0.5 * float(np.sum(state.modes**2 / nu) + np.sum(np.diagonal(state.covs, axis1=1, axis2=2) / nu)),
        "offset_prior": -0.5 * model.n_offsets * (LOG_2PI + np.log(hyper.sigma_eta2))
        - 0.5 * float(state.mu_eta0 @ state.mu_eta0 + np.trace(state.sigma_eta0)) / hyper.sigma_eta2,
        "beta_prior": -0.5 * reparam.n_null * (LOG_2PI + np.log(hyper.sigma_beta2))
        - 0.5 * float(state.mu_beta @ state.mu_beta + np.trace(state.sigma_beta)) / hyper.sigma_beta2,
        "delta_prior": -0.5 * reparam.n_penalized * LOG_2PI
        + 0.5 * float(np.sum(np.log(penalty)))
        - 0.5 * float(penalty @ (state.mu_delta**2 + np.diag(state.sigma_delta))),
    }
    shape = hyper.a_l + 2.0
    components["lambda_prior"] = sum(
        shape * np.log(hyper.b_l) - gammaln(shape) + (hyper.a_l + 1.0) * q.log_mean - hyper.b_l * q.mean for q in (lambda_x, lambda_t)
    )
    components["variance_prior"] = (
        hyper.a_s * np.log(hyper.b_s) - gammaln(hyper.a_s) - (hyper.a_s + 1.0) * log_s2 - hyper.b_s * inv_s2
        + hyper.a_x * np.log(hyper.b_x) - gammaln(hyper.a_x) - (hyper.a_x + 1.0) * log_x2 - hyper.b_x * inv_x2
    )
    entropy = _gaussian_entropy(state.sigma_eta0) + _gaussian_entropy(state.sigma_beta) + _gaussian_entropy(state.sigma_delta)
    if not scores_fixed:
        entropy += sum(_gaussian_entropy(cov) for cov in state.covs)
    components["gaussian_entropy"] = entropy
    components["scale_entropy"] = (
        lambda_x.entropy
        + lambda_t.entropy
        + _inverse_gamma_entropy(state.a_sigma2, state.b_sigma2)
        + _inverse_gamma_entropy(state.a_sigma_x2, state.b_sigma_x2)
    )
    return {name: float(components[name]) for name in BOUND_COMPONENTS}


def lower_bound(state: VbState, scores_fixed: bool = False) -> float:
    """
    Evidence lower bound of the current state.

    Parameters
    ----------
    state : VbState
        Current state.
    scores_fixed : bool, default: False
        If True, the score factors are point masses.

    Returns
    -------
    float
        Sum of :py:func:`bound_components`.

    Raises
    ------
    FittingError
        Naming the first non-finite component.
    """
    components = bound_components(state, scores_fixed)
    for name, value in components.items():
        if not np.isfinite(value):
            raise FittingError(f"Lower-bound component '{name}' is not finite ({value}).", module="vb", iteration=state.iterations)
    return float(sum(components.values()))


class VariationalFitter:
    """
    Coordinate-ascent driver.

    Parameters
    ----------
    model : FgamModel
        The model.
    config : VbConfig
        Fitter settings.
    """

    def __init__(self, model: FgamModel, config: VbConfig) -> None:
        self.model = model
        self.config = config
        self.rule = gauss_laguerre(config.laguerre_points, model.hyper.a_l + 1.0)
        self.state = VbState(model, config)

    def update_scores(self) -> None:
        """Laplace update of every subject; subjects are independent given the global factors."""
        mu_theta, sigma_theta = self.state.mu_theta(), self.state.sigma_theta()
        indices = range(self.model.n_subjects)
        if self.config.n_jobs == 1:
            for i in indices:
                laplace_update_scores(self.state, i, self.config, mu_theta, sigma_theta)
        else:
            Parallel(n_jobs=self.config.n_jobs, prefer="threads")(
                delayed(laplace_update_scores)(self.state, i, self.config, mu_theta, sigma_theta) for i in indices
            )

    def sweep(self) -> None:
        """One pass over all factors."""
        if self.config.update_scores:
            self.update_scores()
        update_coefficient_densities(self.state)
        if self.config.update_lambdas:
            update_q_lambda(self.state, "x", self.rule)
            update_q_lambda(self.state, "t", self.rule)
        update_q_variances(self.state)

    def run(self) -> VbState:
        """
        Iterate until the relative change of the bound falls below the tolerance.

        Returns
        -------
        VbState
            Final state with its bound trace.

        Raises
        ------
        FittingError
            On any numerical failure, carrying the failing iteration.
        """
        state, config = self.state, self.config
        start = time.perf_counter()
        previous = -np.inf
        for iteration in range(1, config.max_iter + 1):
            state.iterations = iteration
            try:
                self.sweep()
            except (linalg.LinAlgError, ValueError) as err:
                raise FittingError(str(err), module="vb", iteration=iteration) from err
            bound = lower_bound(state, scores_fixed=not config.update_scores)
            state.bound_trace.append(bound)
            if np.isfinite(previous):
                change = (bound - previous) / abs(previous)
                if change < -1e-8:
                    logger.warning("Lower bound decreased by %.3g (relative) at iteration %s.", -change, iteration)
                if abs(change) < config.tol:
                    state.converged = True
                    break
            logger.debug("VB iteration %s: bound %.10g.", iteration, bound)
            previous = bound
        state.elapsed = time.perf_counter() - start
        if not state.converged:
            logger.warning("VB did not converge in %s iterations; last bound %.10g.", config.max_iter, state.bound_trace[-1])
        if state.regularized.any():
            logger.warning("%s score precision(s) were regularized.", int(state.regularized.sum()))
        logger.info("VB finished after %s iterations in %.1f s.", state.iterations, state.elapsed)
        return state


def run_vb(data: SparseFunctionalDataset, fpca: FpcaResult, config: VbConfig | None = None, model: FgamModel | None = None) -> VbState:
    """
    Fit the FGAM by variational Bayes.

    Parameters
    ----------
    data : SparseFunctionalDataset
        Fitting data.
    fpca : FpcaResult
        Frozen FPCA initialization.
    config : VbConfig, optional
        Fitter settings.
    model : FgamModel, optional
        Prebuilt model; must share `data` and `fpca`.

    Returns
    -------
    VbState
        Converged (or last) variational state; deterministic for fixed inputs.
    """
    config = VbConfig() if config is None else config
    model = FgamModel(data, fpca, config.basis, config.hyper) if model is None else model
    return VariationalFitter(model, config).run()


def predict_vb(state: VbState, subjects: Sequence[Subject], config: VbConfig | None = None, include_noise: bool = False, level: float = 0.95) -> pd.DataFrame:
    """
    Predictions for new subjects from the variational fit.

    Each subject's scores get a Laplace update with the response term disabled, which
    is exact (Gaussian) in that case.

    Parameters
    ----------
    state : VbState
        Fitted state.
    subjects : sequence of Subject
        Prediction targets, each with at least one observation. Subjects without offset
        covariates get no offset term.
    config : VbConfig, optional
        Newton settings.
    include_noise : bool, default: False
        If True, the interval includes response noise at ``B/A`` of the variance factor.
    level : float, default: 0.95
        Central interval probability of the normal approximation.

    Returns
    -------
    pandas.DataFrame
        Columns ``subject_id``, ``mean``, ``lower`` and ``upper``.
    """
    config = VbConfig() if config is None else config
    model = state.model
    mu_theta, sigma_theta = state.mu_theta(), state.sigma_theta()
    z = stats.norm.ppf(0.5 + level / 2.0)
    records = []
    for term in model.new_subject_terms(list(subjects)):
        objective = ScoreObjective(model, term, mu_theta, sigma_theta, 0.0, 0.0, state.mu_inv_sigma_x2)
        start = term.score_moments(model.fpca.nu, 1.0 / state.mu_inv_sigma_x2)[0]
        result = laplace_mode(objective, start, config)
        offsets = term.subject.offsets
        mean = float(result.eb @ mu_theta + (offsets @ state.mu_eta0 if offsets.size else 0.0))
        var = float(np.sum(result.ebb * sigma_theta) + mu_theta @ (result.ebb - np.outer(result.eb, result.eb)) @ mu_theta)
        if offsets.size:
            var += float(offsets @ state.sigma_eta0 @ offsets)
        if include_noise:
            var += state.b_sigma2 / state.a_sigma2
        half = z * np.sqrt(max(var, 0.0))
        records.append({"subject_id": term.subject.subject_id, "mean": mean, "lower": mean - half, "upper": mean + half})
    return pd.DataFrame.from_records(records, columns=["subject_id", "mean", "lower", "upper"])
