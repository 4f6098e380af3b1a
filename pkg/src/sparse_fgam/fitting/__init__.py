"""FPCA initialization, reparameterization and the two FGAM fitters."""

from __future__ import annotations

from .fpca import FpcaOptions, FpcaResult, blup_scores, eigendecompose, estimate_covariance, estimate_mean, estimate_noise_variance, pace_init
from .mcmc import McmcConfig, McmcState, PosteriorSamples, predict_mcmc, run_mcmc
from .model import BasisOptions, FgamModel, Hyperparameters
from .reparam import PenaltyPair, ReparamBasis, build_penalties, diagonalize, reconstruct_theta, split_design_row
from .vb import LaguerreRule, VbConfig, VbState, gauss_laguerre, lower_bound, predict_vb, run_vb


__all__ = [
    "BasisOptions",
    "FgamModel",
    "FpcaOptions",
    "FpcaResult",
    "Hyperparameters",
    "LaguerreRule",
    "McmcConfig",
    "McmcState",
    "PenaltyPair",
    "PosteriorSamples",
    "ReparamBasis",
    "VbConfig",
    "VbState",
    "blup_scores",
    "build_penalties",
    "diagonalize",
    "eigendecompose",
    "estimate_covariance",
    "estimate_mean",
    "estimate_noise_variance",
    "gauss_laguerre",
    "lower_bound",
    "pace_init",
    "predict_mcmc",
    "predict_vb",
    "reconstruct_theta",
    "run_mcmc",
    "run_vb",
    "split_design_row",
]
