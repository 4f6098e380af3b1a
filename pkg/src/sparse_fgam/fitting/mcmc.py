"""
Metropolis-within-Gibbs sampler for the FGAM with sparse functional covariates.

One sweep updates, in order: the principal component scores (independence
Metropolis-Hastings, one proposal per subject), the offset coefficients, the unpenalized and
penalized surface coefficients (conjugate normal draws), the two smoothing parameters (slice
sampling) and the two variances (conjugate inverse-gamma draws).
"""

from __future__ import annotations
import logging
import time
from collections.abc import Sequence
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import linalg

from ..helpers.auxiliary import FittingError, FloatArray
from ..helpers.dataset import SparseFunctionalDataset, Subject
from ..helpers.statistics import (
    batch_means_se,
    draw_inverse_gamma,
    sample_gaussian_precision,
    slice_sample_positive,
    spawn_generators,
)
from .fpca import FpcaResult
from .model import BasisOptions, FgamModel, Hyperparameters, SubjectTerms


if TYPE_CHECKING:
    from .vb import VbState

logger = logging.getLogger(__name__)


class McmcConfig:
    """
    Sampler settings.

    Parameters
    ----------
    iters : int, default: 10000
        Total number of sweeps, burn-in included.
    burnin : int, default: 1000
        Sweeps discarded before storing.
    thin : int, default: 1
        Store every `thin`-th sweep after burn-in.
    seed : int, default: 0
        Root seed of all random streams.
    hyper : Hyperparameters, optional
        Prior hyperparameters.
    basis : BasisOptions, optional
        Surface basis settings.
    slice_width : float, default: 2.0
        Initial right end of the slice bracket ``[0, slice_width]``.
    max_doublings : int, default: 60
        Cap on slice-bracket doublings.
    update_scores : bool, default: True
        If False, scores stay at their initial values.
    n_jobs : int, default: 1
        Threads for the per-subject score updates.
    """

    def __init__(
        self,
        iters: int = 10000,
        burnin: int = 1000,
        thin: int = 1,
        seed: int = 0,
        hyper: Hyperparameters | None = None,
        basis: BasisOptions | None = None,
        slice_width: float = 2.0,
        max_doublings: int = 60,
        update_scores: bool = True,
        n_jobs: int = 1,
    ) -> None:
        if burnin < 0 or iters <= burnin:
            raise ValueError(f"Invalid iters/burnin: {iters}/{burnin}. Must satisfy iters > burnin >= 0.")
        if thin < 1 or (iters - burnin) // thin < 1:
            raise ValueError(f"Invalid thin: {thin}. Must be at least 1 and leave at least one stored draw.")
        if slice_width <= 0:
            raise ValueError(f"Invalid slice_width: {slice_width}. Must be positive.")
        self.iters = iters
        self.burnin = burnin
        self.thin = thin
        self.seed = seed
        self.hyper = Hyperparameters() if hyper is None else hyper
        self.basis = BasisOptions() if basis is None else basis
        self.slice_width = slice_width
        self.max_doublings = max_doublings
        self.update_scores = update_scores
        self.n_jobs = n_jobs

    @property
    def n_draws(self) -> int:
        """Number of stored draws, ``(iters - burnin) // thin``."""
        return (self.iters - self.burnin) // self.thin

    def __repr__(self) -> str:
        return f"McmcConfig(iters={self.iters}, burnin={self.burnin}, thin={self.thin}, seed={self.seed})"


class McmcState:
    """
    Current values of all sampled quantities with cached design rows.

    Parameters
    ----------
    eta0 : numpy.ndarray
        Offset coefficients.
    beta : numpy.ndarray
        Unpenalized surface coefficients.
    delta : numpy.ndarray
        Penalized surface coefficients.
    lambda_x, lambda_t : float
        Smoothing parameters.
    sigma2 : float
        Response variance.
    sigma_x2 : float
        Measurement-error variance.
    scores : numpy.ndarray
        Score matrix ``(N, M)``.
    """

    def __init__(
        self,
        eta0: FloatArray,
        beta: FloatArray,
        delta: FloatArray,
        lambda_x: float,
        lambda_t: float,
        sigma2: float,
        sigma_x2: float,
        scores: FloatArray,
    ) -> None:
        self.eta0 = np.array(eta0, dtype=float)
        self.beta = np.array(beta, dtype=float)
        self.delta = np.array(delta, dtype=float)
        self.lambda_x = float(lambda_x)
        self.lambda_t = float(lambda_t)
        self.sigma2 = float(sigma2)
        self.sigma_x2 = float(sigma_x2)
        self.scores = np.array(scores, dtype=float)
        self.z0 = np.zeros((self.scores.shape[0], self.beta.size))
        self.zp = np.zeros((self.scores.shape[0], self.delta.size))
        self.accepted = np.zeros(self.scores.shape[0], dtype=int)
        self.attempted = np.zeros(self.scores.shape[0], dtype=int)
        self.clamped = np.zeros(self.scores.shape[0], dtype=int)
        self.n_clamped = 0

    @classmethod
    def initial(cls, model: FgamModel, warm_start: VbState | None = None) -> McmcState:
        """
        Starting state from the FPCA initialization or a VB fit.

        Parameters
        ----------
        model : FgamModel
            The model.
        warm_start : VbState, optional
            Variational fit whose means start the chain.

        Returns
        -------
        McmcState
            State with design rows computed.
        """
        if warm_start is not None:
            state = cls(
                warm_start.mu_eta0,
                warm_start.mu_beta,
                warm_start.mu_delta,
                warm_start.mu_lambda_x,
                warm_start.mu_lambda_t,
                warm_start.b_sigma2 / warm_start.a_sigma2,
                warm_start.b_sigma_x2 / warm_start.a_sigma_x2,
                warm_start.modes,
            )
        else:
            reparam = model.reparam
            state = cls(
                np.zeros(model.n_offsets),
                np.zeros(reparam.n_null),
                np.zeros(reparam.n_penalized),
                1.0,
                1.0,
                max(float(np.var(model.y)), 1e-8),
                model.fpca.sigma_x2,
                model.fpca.scores,
            )
        state.refresh_rows(model)
        return state

    def refresh_rows(self, model: FgamModel) -> None:
        """Recompute all cached design rows from the current scores."""
        self.z0, self.zp, self.n_clamped = model.design_rows(self.scores)

    def offset_term(self, model: FgamModel) -> FloatArray:
        """Offset part ``U η0`` of the linear predictor."""
        return model.offsets @ self.eta0

    def surface_term(self) -> FloatArray:
        """Functional part ``Z0 β + Zp δ`` of the linear predictor."""
        return self.z0 @ self.beta + self.zp @ self.delta

    def linear_predictor(self, model: FgamModel) -> FloatArray:
        """Fitted values of all subjects."""
        return self.offset_term(model) + self.surface_term()

    def copy(self) -> McmcState:
        """Deep copy."""
        other = McmcState(self.eta0, self.beta, self.delta, self.lambda_x, self.lambda_t, self.sigma2, self.sigma_x2, self.scores)
        other.z0, other.zp = self.z0.copy(), self.zp.copy()
        other.accepted, other.attempted = self.accepted.copy(), self.attempted.copy()
        other.clamped = self.clamped.copy()
        other.n_clamped = self.n_clamped
        return other

    def __repr__(self) -> str:
        return f"McmcState(lambda_x={self.lambda_x:.4g}, lambda_t={self.lambda_t:.4g}, sigma2={self.sigma2:.4g}, sigma_x2={self.sigma_x2:.4g})"


def update_variances(state: McmcState, model: FgamModel, rng: np.random.Generator) -> McmcState:
    """
    Draw both variances from their inverse-gamma full conditionals.

    Parameters
    ----------
    state : McmcState
        Current state, modified in place.
    model : FgamModel
        The model.
    rng : numpy.random.Generator
        Random stream.

    Returns
    -------
    McmcState
        The updated state.

    Raises
    ------
    ValueError
        If a residual sum of squares is not finite.
    """
    hyper = model.hyper
    x_ss = model.x_residual_ss(state.scores)
    resid = model.y - state.linear_predictor(model)
    y_ss = float(resid @ resid)
    if not (np.isfinite(x_ss) and np.isfinite(y_ss)):
        raise ValueError(f"Invalid residuals: sums of squares {x_ss}, {y_ss}. Must be finite.")
    state.sigma_x2 = draw_inverse_gamma(rng, model.total_obs / 2.0 + hyper.a_x, hyper.b_x + 0.5 * x_ss)
    state.sigma2 = draw_inverse_gamma(rng, model.n_subjects / 2.0 + hyper.a_s, hyper.b_s + 0.5 * y_ss)
    return state


def update_offsets(state: McmcState, model: FgamModel, rng: np.random.Generator) -> McmcState:
    """
    Draw the offset coefficients from their normal full conditional.

    Parameters
    ----------
    state : McmcState
        Current state, modified in place.
    model : FgamModel
        The model.
    rng : numpy.random.Generator
        Random stream.

    Returns
    -------
    McmcState
        The updated state.
    """
    if model.n_offsets:
        u = model.offsets
        precision = u.T @ u / state.sigma2 + np.eye(model.n_offsets) / model.hyper.sigma_eta2
        state.eta0, _ = sample_gaussian_precision(rng, precision, u.T @ (model.y - state.surface_term()) / state.sigma2)
    return state


def update_coefficients(state: McmcState, model: FgamModel, rng: np.random.Generator) -> McmcState:
    """
    Draw the unpenalized then the penalized surface coefficients.

    Parameters
    ----------
    state : McmcState
        Current state, modified in place.
    model : FgamModel
        The model.
    rng : numpy.random.Generator
        Random stream.

    Returns
    -------
    McmcState
        The updated state.

    Raises
    ------
    numpy.linalg.LinAlgError
        If a conditional precision is not positive definite.
    """
    target = model.y - state.offset_term(model)
    z0, zp = state.z0, state.zp
    precision = z0.T @ z0 / state.sigma2 + np.eye(z0.shape[1]) / model.hyper.sigma_beta2
    state.beta, _ = sample_gaussian_precision(rng, precision, z0.T @ (target - zp @ state.delta) / state.sigma2)
    precision = zp.T @ zp / state.sigma2 + np.diag(model.reparam.precision(state.lambda_x, state.lambda_t))
    state.delta, _ = sample_gaussian_precision(rng, precision, zp.T @ (target - z0 @ state.beta) / state.sigma2)
    return state


def lambda_log_density(lam: float, psi_axis: FloatArray, other: FloatArray, delta: FloatArray, a_l: float, b_l: float) -> float:
    """
    Unnormalized log full conditional of one smoothing parameter.

    Parameters
    ----------
    lam : float
        Evaluation point.
    psi_axis : numpy.ndarray
        Penalty factor of the updated axis.
    other : numpy.ndarray
        ``lambda_other * psi_other``.
    delta : numpy.ndarray
        Penalized coefficients.
    a_l, b_l : float
        Prior hyperparameters.

    Returns
    -------
    float
        ``½ Σ log(lam ψ + other) + (a_l + 1) log lam - (b_l + ½ Σ ψ δ²) lam``, or ``-inf``
        for non-positive `lam`.
    """
    if lam <= 0:
        return -np.inf
    return float(0.5 * np.sum(np.log(lam * psi_axis + other)) + (a_l + 1.0) * np.log(lam) - (b_l + 0.5 * psi_axis @ delta**2) * lam)


def slice_sample_lambda(
    state: McmcState,
    model: FgamModel,
    axis: str,
    rng: np.random.Generator,
    width: float = 2.0,
    max_doublings: int = 60,
) -> McmcState:
    """
    Slice-sampling transition for ``lambda_x`` or ``lambda_t``.

    Parameters
    ----------
    state : McmcState
        Current state, modified in place.
    model : FgamModel
        The model.
    axis : {"x", "t"}
        Smoothing parameter to update.
    rng : numpy.random.Generator
        Random stream.
    width : float, default: 2.0
        Initial bracket ``[0, width]``.
    max_doublings : int, default: 60
        Cap on bracket doublings.

    Returns
    -------
    McmcState
        The updated state.
    """
    reparam, hyper = model.reparam, model.hyper
    if axis == "x":
        psi, other, current = reparam.psi_x, state.lambda_t * reparam.psi_t, state.lambda_x
    elif axis == "t":
        psi, other, current = reparam.psi_t, state.lambda_x * reparam.psi_x, state.lambda_t
    else:
        raise ValueError(f"Invalid axis: {axis}. Must be 'x' or 't'.")

    def log_density(lam: float) -> float:
        return lambda_log_density(lam, psi, other, state.delta, hyper.a_l, hyper.b_l)

    new, _ = slice_sample_positive(log_density, current, rng, width, max_doublings)
    if axis == "x":
        state.lambda_x = new
    else:
        state.lambda_t = new
    return state


def acceptance_log_ratio(resid_proposed: float, resid_current: float, sigma2: float) -> float:
    """Log acceptance ratio ``-(r*² - r²) / (2 sigma2)`` of the independence proposal."""
    return -(resid_proposed**2 - resid_current**2) / (2.0 * sigma2)


def mh_update_scores(state: McmcState, model: FgamModel, i: int, rng: np.random.Generator) -> bool:
    """
    Independence Metropolis-Hastings update of one subject's scores.

    The proposal is the conditional of the scores given the trajectory data alone, so the
    acceptance ratio reduces to the response likelihood ratio.

    Parameters
    ----------
    state : McmcState
        Current state; row `i` of the scores and design rows is modified in place.
    model : FgamModel
        The model.
    i : int
        Subject position.
    rng : numpy.random.Generator
        The subject's random stream.

    Returns
    -------
    bool
        Whether the proposal was accepted.

    Raises
    ------
    ValueError
        If the acceptance ratio is not finite.
    """
    term = model.terms[i]
    mean, cov = term.score_moments(model.fpca.nu, state.sigma_x2)
    proposal = rng.multivariate_normal(mean, cov, method="cholesky")
    row, n_clamped = model.design.row(model.trajectory(proposal))
    z0, zp = model.reparam.split_design_row(row)

    base = model.y[i] - (model.offsets[i] @ state.eta0 if model.n_offsets else 0.0)
    resid_current = base - state.z0[i] @ state.beta - state.zp[i] @ state.delta
    resid_proposed = base - z0 @ state.beta - zp @ state.delta
    log_ratio = acceptance_log_ratio(resid_proposed, resid_current, state.sigma2)
    if not np.isfinite(log_ratio):
        raise ValueError(f"Invalid acceptance ratio for subject {i}: {log_ratio}.")

    state.attempted[i] += 1
    if np.log(rng.uniform()) < log_ratio:
        state.scores[i] = proposal
        state.z0[i], state.zp[i] = z0, zp
        state.accepted[i] += 1
        state.clamped[i] += n_clamped
        return True
    return False


class PosteriorSamples:
    """
    Stored draws of one chain.

    Parameters
    ----------
    model : FgamModel
        Model the chain targeted.
    n_draws : int
        Number of stored draws.
    """

    def __init__(self, model: FgamModel, n_draws: int) -> None:
        n, m = model.n_subjects, model.fpca.n_components
        self.model = model
        self.iteration = np.zeros(n_draws, dtype=int)
        self.eta0 = np.zeros((n_draws, model.n_offsets))
        self.beta = np.zeros((n_draws, model.reparam.n_null))
        self.delta = np.zeros((n_draws, model.reparam.n_penalized))
        self.lambda_x = np.zeros(n_draws)
        self.lambda_t = np.zeros(n_draws)
        self.sigma2 = np.zeros(n_draws)
        self.sigma_x2 = np.zeros(n_draws)
        self.scores = np.zeros((n_draws, n, m))
        self.fitted = np.zeros((n_draws, n))
        self.accepted = np.zeros(n, dtype=int)
        self.attempted = np.zeros(n, dtype=int)
        self.n_clamped = 0
        self.elapsed = 0.0
        self.last_state: McmcState | None = None

    @property
    def n_draws(self) -> int:
        """Number of stored draws."""
        return int(self.iteration.size)

    def store(self, position: int, iteration: int, state: McmcState) -> None:
        """Record `state` as draw number `position`."""
        self.iteration[position] = iteration
        self.eta0[position] = state.eta0
        self.beta[position] = state.beta
        self.delta[position] = state.delta
        self.lambda_x[position] = state.lambda_x
        self.lambda_t[position] = state.lambda_t
        self.sigma2[position] = state.sigma2
        self.sigma_x2[position] = state.sigma_x2
        self.scores[position] = state.scores
        self.fitted[position] = state.linear_predictor(self.model)

    def theta(self) -> FloatArray:
        """Surface coefficients of every draw, shape ``(S, Kx * Kt)``."""
        return self.model.reparam.reconstruct_theta(self.beta, self.delta)

    def acceptance_rate(self) -> FloatArray:
        """Per-subject acceptance rate, accepted over attempted."""
        return np.divide(self.accepted, self.attempted, out=np.zeros(self.accepted.size), where=self.attempted > 0)

    def trajectories(self) -> FloatArray:
        """Posterior-mean curves ``mu + phi E[xi]`` on the working grid."""
        return self.model.fpca.trajectories(self.scores.mean(axis=0))

    def surface(self, x: FloatArray, t: FloatArray) -> tuple[FloatArray, FloatArray]:
        """
        Posterior mean and standard deviation of the surface on a rectangular grid.

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
        draws = self.model.design.surface(self.theta(), x, t)
        return draws.mean(axis=0), draws.std(axis=0)

    def scalar_draws(self) -> dict[str, FloatArray]:
        """Named one-dimensional chains of every sampled quantity except the scores."""
        chains: dict[str, FloatArray] = {}
        for name in ("eta0", "beta", "delta"):
            block = getattr(self, name)
            for j in range(block.shape[1]):
                chains[f"{name}[{j}]"] = block[:, j]
        for name in ("lambda_x", "lambda_t", "sigma2", "sigma_x2"):
            chains[name] = getattr(self, name)
        return chains

    def long_format(self) -> pd.DataFrame:
        """
        Draws as a long table.

        Returns
        -------
        pandas.DataFrame
            Columns ``iter``, ``param`` and ``value``, ordered by iteration then parameter.
        """
        chains = self.scalar_draws()
        names = list(chains)
        values = np.column_stack([chains[name] for name in names])
        return pd.DataFrame(
            {
                "iter": np.repeat(self.iteration, len(names)),
                "param": np.tile(names, self.n_draws),
                "value": values.ravel(),
            }
        )

    def summary(self) -> pd.DataFrame:
        """
        Posterior summaries of every scalar chain.

        Returns
        -------
        pandas.DataFrame
            Mean, standard deviation, batch-means Monte Carlo standard error and the
            2.5% and 97.5% quantiles, indexed by parameter name.
        """
        rows = {}
        for name, chain in self.scalar_draws().items():
            rows[name] = {
                "mean": chain.mean(),
                "sd": chain.std(ddof=1) if chain.size > 1 else 0.0,
                "mcse": float(batch_means_se(chain)) if chain.size > 3 else np.nan,
                "q2.5": np.quantile(chain, 0.025),
                "q97.5": np.quantile(chain, 0.975),
            }
        return pd.DataFrame.from_dict(rows, orient="index")

    def __repr__(self) -> str:
        return f"PosteriorSamples(n_draws={self.n_draws}, mean_acceptance={self.acceptance_rate().mean():.3f})"


class FgamSampler:
    """
    Metropolis-within-Gibbs sampler owning one chain.

    Parameters
    ----------
    model : FgamModel
        The model.
    config : McmcConfig
        Sampler settings.
    warm_start : VbState, optional
        Variational fit used as the starting state.
    """

    def __init__(self, model: FgamModel, config: McmcConfig, warm_start: VbState | None = None) -> None:
        self.model = model
        self.config = config
        streams = spawn_generators(config.seed, model.n_subjects + 1)
        self.rng = streams[0]
        self.subject_rngs = streams[1:]
        self.state = McmcState.initial(model, warm_start)

    def update_scores(self) -> None:
        """Score update for every subject; subjects are independent given the rest."""
        if self.config.n_jobs == 1:
            for i, rng in enumerate(self.subject_rngs):
                mh_update_scores(self.state, self.model, i, rng)
        else:
            Parallel(n_jobs=self.config.n_jobs, prefer="threads")(
                delayed(mh_update_scores)(self.state, self.model, i, rng) for i, rng in enumerate(self.subject_rngs)
            )

    def sweep(self) -> None:
        """One full pass over all blocks."""
        if self.config.update_scores:
            self.update_scores()
        update_offsets(self.state, self.model, self.rng)
        update_coefficients(self.state, self.model, self.rng)
        slice_sample_lambda(self.state, self.model, "x", self.rng, self.config.slice_width, self.config.max_doublings)
        slice_sample_lambda(self.state, self.model, "t", self.rng, self.config.slice_width, self.config.max_doublings)
        update_variances(self.state, self.model, self.rng)

    def run(self) -> PosteriorSamples:
        """
        Run the chain.

        Returns
        -------
        PosteriorSamples
            Stored draws after burn-in and thinning.

        Raises
        ------
        FittingError
            On any numerical failure, carrying the failing iteration.
        """
        config = self.config
        samples = PosteriorSamples(self.model, config.n_draws)
        start = time.perf_counter()
        position = 0
        for iteration in range(config.iters):
            try:
                self.sweep()
            except (linalg.LinAlgError, ValueError) as err:
                raise FittingError(str(err), module="mcmc", iteration=iteration + 1) from err
            if iteration >= config.burnin and (iteration - config.burnin + 1) % config.thin == 0 and position < samples.n_draws:
                samples.store(position, iteration + 1, self.state)
                position += 1
            if (iteration + 1) % 1000 == 0:
                logger.debug("MCMC iteration %s of %s.", iteration + 1, config.iters)

        samples.accepted = self.state.accepted.copy()
        samples.attempted = self.state.attempted.copy()
        samples.n_clamped = self.state.n_clamped + int(self.state.clamped.sum())
        samples.elapsed = time.perf_counter() - start
        samples.last_state = self.state.copy()
        logger.info(
            "MCMC finished %s iterations in %.1f s; mean acceptance %.3f.",
            config.iters,
            samples.elapsed,
            samples.acceptance_rate().mean() if self.config.update_scores else float("nan"),
        )
        return samples


def run_mcmc(
    data: SparseFunctionalDataset,
    fpca: FpcaResult,
    config: McmcConfig | None = None,
    warm_start: VbState | None = None,
    model: FgamModel | None = None,
) -> PosteriorSamples:
    """
    Fit the FGAM by Metropolis-within-Gibbs sampling.

    Parameters
    ----------
    data : SparseFunctionalDataset
        Fitting data.
    fpca : FpcaResult
        Frozen FPCA initialization.
    config : McmcConfig, optional
        Sampler settings.
    warm_start : VbState, optional
        Variational fit providing starting values.
    model : FgamModel, optional
        Prebuilt model; must share `data` and `fpca`.

    Returns
    -------
    PosteriorSamples
        Stored draws; reproducible for a fixed seed.
    """
    config = McmcConfig() if config is None else config
    model = FgamModel(data, fpca, config.basis, config.hyper) if model is None else model
    return FgamSampler(model, config, warm_start).run()


def predict_mcmc(
    samples: PosteriorSamples,
    subjects: Sequence[Subject],
    include_noise: bool = False,
    level: float = 0.95,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Posterior predictive summaries for new subjects.

    For each stored draw the subject's scores are the BLUP under that draw's
    measurement-error variance.

    Parameters
    ----------
    samples : PosteriorSamples
        Stored draws.
    subjects : sequence of Subject
        Prediction targets, each with at least one observation. Subjects without offset
        covariates get no offset term.
    include_noise : bool, default: False
        If True, the interval includes response noise drawn with each draw's variance.
    level : float, default: 0.95
        Central interval probability.
    seed : int, default: 0
        Seed of the response-noise stream.

    Returns
    -------
    pandas.DataFrame
        Columns ``subject_id``, ``mean``, ``lower`` and ``upper``.
    """
    model = samples.model
    terms: list[SubjectTerms] = model.new_subject_terms(list(subjects))
    theta = samples.theta()
    rng = np.random.default_rng(seed)
    tail = (1.0 - level) / 2.0
    records = []
    for term in terms:
        scores = np.array([term.score_moments(model.fpca.nu, s2)[0] for s2 in samples.sigma_x2])
        rows, _ = model.design.rows(model.fpca.trajectories(scores))
        draws = np.einsum("sk,sk->s", rows, theta)
        if term.subject.offsets.size:
            draws = draws + samples.eta0 @ term.subject.offsets
        spread = draws + rng.standard_normal(draws.size) * np.sqrt(samples.sigma2) if include_noise else draws
        records.append(
            {
                "subject_id": term.subject.subject_id,
                "mean": draws.mean(),
                "lower": np.quantile(spread, tail),
                "upper": np.quantile(spread, 1.0 - tail),
            }
        )
    return pd.DataFrame.from_records(records, columns=["subject_id", "mean", "lower", "upper"])
