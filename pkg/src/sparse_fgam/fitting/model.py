"""Model structure shared by the MCMC and VB fitters."""

from __future__ import annotations
import logging

import numpy as np

from ..helpers.auxiliary import DatasetError, FloatArray, check_positive
from ..helpers.basis import SplineBasis, TensorDesign
from ..helpers.dataset import SparseFunctionalDataset, Subject
from .fpca import FpcaResult, score_posterior
from .reparam import ReparamBasis, build_penalties, diagonalize


logger = logging.getLogger(__name__)


class BasisOptions:
    """
    Size and placement of the tensor-product surface basis.

    Parameters
    ----------
    kx : int, default: 10
        Basis functions along the trajectory-value axis.
    kt : int, default: 10
        Basis functions along the time axis.
    dx : int, default: 2
        Difference-penalty order along the trajectory-value axis.
    dt : int, default: 2
        Difference-penalty order along the time axis.
    degree : int, default: 3
        Spline degree of both marginal bases.
    x_margin : float, default: 0.1
        Fraction of the trajectory range added on each side of the `x` basis domain.
    """

    def __init__(self, kx: int = 10, kt: int = 10, dx: int = 2, dt: int = 2, degree: int = 3, x_margin: float = 0.1) -> None:
        for name, k, d in (("x", kx, dx), ("t", kt, dt)):
            if k < degree + 1:
                raise ValueError(f"Invalid k{name}: {k}. Must be at least degree + 1 = {degree + 1}.")
            if not 1 <= d < k:
                raise ValueError(f"Invalid d{name}: {d}. Must satisfy 1 <= d{name} < k{name}.")
        if x_margin < 0:
            raise ValueError(f"Invalid x_margin: {x_margin}. Must be zero or positive.")
        self.kx = kx
        self.kt = kt
        self.dx = dx
        self.dt = dt
        self.degree = degree
        self.x_margin = x_margin

    def __repr__(self) -> str:
        return f"BasisOptions(kx={self.kx}, kt={self.kt}, dx={self.dx}, dt={self.dt}, degree={self.degree})"


class Hyperparameters:
    """
    Prior hyperparameters.

    Parameters
    ----------
    a_s, b_s : float, default: 0.01
        Inverse-gamma prior of the response variance.
    a_x, b_x : float, default: 0.01
        Inverse-gamma prior of the measurement-error variance.
    a_l, b_l : float, default: 0.01
        Prior of the smoothing parameters, with density proportional to
        ``lambda^(a_l + 1) exp(-b_l lambda)``.
    sigma_beta2 : float, default: 1e6
        Prior variance of the unpenalized surface coefficients.
    sigma_eta2 : float, default: 1e6
        Prior variance of the offset coefficients.
    """

    def __init__(
        self,
        a_s: float = 0.01,
        b_s: float = 0.01,
        a_x: float = 0.01,
        b_x: float = 0.01,
        a_l: float = 0.01,
        b_l: float = 0.01,
        sigma_beta2: float = 1e6,
        sigma_eta2: float = 1e6,
    ) -> None:
        check_positive(a_s=a_s, b_s=b_s, a_x=a_x, b_x=b_x, a_l=a_l, b_l=b_l, sigma_beta2=sigma_beta2, sigma_eta2=sigma_eta2)
        self.a_s = a_s
        self.b_s = b_s
        self.a_x = a_x
        self.b_x = b_x
        self.a_l = a_l
        self.b_l = b_l
        self.sigma_beta2 = sigma_beta2
        self.sigma_eta2 = sigma_eta2

    def __repr__(self) -> str:
        return (
            f"Hyperparameters(a_s={self.a_s}, b_s={self.b_s}, a_x={self.a_x}, b_x={self.b_x}, "
            f"a_l={self.a_l}, b_l={self.b_l}, sigma_beta2={self.sigma_beta2}, sigma_eta2={self.sigma_eta2})"
        )


class SubjectTerms:
    """
    Frozen FPCA quantities of one subject at its observation times.

    Parameters
    ----------
    subject : Subject
        The subject.
    fpca : FpcaResult
        FPCA output supplying mean and eigenfunctions.
    """

    def __init__(self, subject: Subject, fpca: FpcaResult) -> None:
        mu_i, phi_i = fpca.interpolate(subject.times)
        self.subject = subject
        self.phi = phi_i
        self.resid = subject.values - mu_i
        self.phi_gram = phi_i.T @ phi_i
        self.phi_resid = phi_i.T @ self.resid

    def residual_ss(self, scores: FloatArray) -> float:
        """Squared norm of ``x - mu - phi scores`` at the observation times."""
        diff = self.resid - self.phi @ scores
        return float(diff @ diff)

    def score_moments(self, nu: FloatArray, sigma_x2: float) -> tuple[FloatArray, FloatArray]:
        """Mean and covariance of the score distribution given only the trajectory data."""
        return score_posterior(self.phi, self.resid, nu, sigma_x2)


class FgamModel:
    """
    FGAM ``E(y | X) = u η0 + ∫ F(X(t), t) dt`` with a reparameterized tensor-product surface.

    Parameters
    ----------
    data : SparseFunctionalDataset
        Fitting data.
    fpca : FpcaResult
        Frozen FPCA initialization; its scores place the `x` basis.
    basis : BasisOptions, optional
        Surface basis settings.
    hyper : Hyperparameters, optional
        Prior hyperparameters.
    """

    def __init__(
        self,
        data: SparseFunctionalDataset,
        fpca: FpcaResult,
        basis: BasisOptions | None = None,
        hyper: Hyperparameters | None = None,
    ) -> None:
        if fpca.scores.shape[0] != data.n_subjects:
            raise ValueError(f"Invalid fpca: {fpca.scores.shape[0]} score rows for {data.n_subjects} subjects.")
        self.data = data
        self.fpca = fpca
        self.options = BasisOptions() if basis is None else basis
        self.hyper = Hyperparameters() if hyper is None else hyper
        self.grid = fpca.grid

        trajectories = fpca.trajectories()
        lo, hi = float(trajectories.min()), float(trajectories.max())
        margin = self.options.x_margin * (hi - lo) if hi > lo else 1.0
        self.basis_x = SplineBasis.uniform(lo - margin, hi + margin, self.options.kx, self.options.degree)
        self.basis_t = SplineBasis.uniform(self.grid.t[0], self.grid.t[-1], self.options.kt, self.options.degree)
        self.design = TensorDesign(self.basis_x, self.basis_t, self.grid)
        self.reparam: ReparamBasis = diagonalize(build_penalties(self.options.kx, self.options.kt, self.options.dx, self.options.dt))

        self.y = data.y
        self.offsets = data.offsets
        self.terms = [SubjectTerms(subject, fpca) for subject in data.subjects]
        self.total_obs = int(data.n_obs.sum())
        logger.debug("Built %r with %r.", self.reparam, self.basis_x)

    @property
    def n_subjects(self) -> int:
        """Number of fitting subjects."""
        return self.data.n_subjects

    @property
    def n_offsets(self) -> int:
        """Number of offset coefficients ``p0``."""
        return self.data.n_offsets

    def trajectory(self, scores: FloatArray) -> FloatArray:
        """Curve ``mu + phi @ scores`` on the working grid."""
        return self.fpca.mu + self.fpca.phi @ scores

    def design_rows(self, scores: FloatArray) -> tuple[FloatArray, FloatArray, int]:
        """
        Reparameterized design rows of all fitting subjects.

        Parameters
        ----------
        scores : numpy.ndarray
            Score matrix ``(N, M)``.

        Returns
        -------
        tuple of (numpy.ndarray, numpy.ndarray, int)
            ``Z0`` of shape ``(N, n_null)``, ``Zp`` of shape ``(N, n_penalized)`` and the
            number of clamped trajectory values.
        """
        rows, n_clamped = self.design.rows(self.fpca.trajectories(scores))
        z0, zp = self.reparam.split_design_row(rows)
        return z0, zp, n_clamped

    def x_residual_ss(self, scores: FloatArray) -> float:
        """Total squared trajectory residual ``sum_i ||x_i - mu_i - phi_i xi_i||^2``."""
        return float(sum(term.residual_ss(xi) for term, xi in zip(self.terms, scores, strict=True)))

    def new_subject_terms(self, subjects: list[Subject]) -> list[SubjectTerms]:
        """
        FPCA quantities of prediction targets.

        Parameters
        ----------
        subjects : list of Subject
            Subjects with at least one observation each. Offsets may be omitted.

        Returns
        -------
        list of SubjectTerms
            One entry per subject.

        Raises
        ------
        DatasetError
            If a subject has the wrong number of offset covariates.
        """
        for subject in subjects:
            if subject.offsets.size not in (0, self.n_offsets):
                raise DatasetError(f"Subject {subject.subject_id} has {subject.offsets.size} offset(s); the model uses {self.n_offsets}.")
        return [SubjectTerms(subject, self.fpca) for subject in subjects]

    def surface_axes(self, size: int = 40) -> tuple[FloatArray, FloatArray]:
        """
        Rectangular evaluation axes over the fitted trajectory range and the grid.

        Parameters
        ----------
        size : int, default: 40
            Points per axis.

        Returns
        -------
        tuple of (numpy.ndarray, numpy.ndarray)
            The `x` and `t` axes.
        """
        trajectories = self.fpca.trajectories()
        return np.linspace(trajectories.min(), trajectories.max(), size), np.linspace(self.grid.t[0], self.grid.t[-1], size)

    def __repr__(self) -> str:
        return f"FgamModel(n_subjects={self.n_subjects}, n_offsets={self.n_offsets}, n_components={self.fpca.n_components}, {self.reparam!r})"
