"""Bayesian functional generalized additive models for sparse functional covariates."""

from __future__ import annotations

from .fitting import (
    BasisOptions,
    FgamModel,
    FpcaOptions,
    FpcaResult,
    Hyperparameters,
    McmcConfig,
    PosteriorSamples,
    VbConfig,
    VbState,
    pace_init,
    predict_mcmc,
    predict_vb,
    run_mcmc,
    run_vb,
)
from .helpers import DatasetError, FittingError, SparseFunctionalDataset, Subject, load_dataset, write_dataset
from .helpers.auxiliary import (
    FloatArray,
    MatrixFloatType,
    ScalarFloatType,
    SequenceFloatType,
)
from .simulation import Scenario, flm_baseline, generate_dataset, run_scenario
from .visualization import plot_lower_bound, plot_surface, plot_trajectories


__author__ = """The sparse_fgam developers"""
__version__ = "0.1.0-dev.0"
