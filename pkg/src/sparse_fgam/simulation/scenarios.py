"""Replicated simulation runs comparing the fitters against the known truth."""

from __future__ import annotations
import logging
import time
from collections.abc import Callable, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..fitting.fpca import FpcaOptions, FpcaResult, pace_init
from ..fitting.mcmc import McmcConfig, predict_mcmc, run_mcmc
from ..fitting.model import BasisOptions, Hyperparameters
from ..fitting.vb import VbConfig, predict_vb, run_vb
from ..helpers.auxiliary import FloatArray
from ..helpers.dataset import SparseFunctionalDataset
from .flm import flm_baseline
from .generator import N_COMPONENTS, GroundTruth, Scenario, generate_dataset
from .metrics import hull_mask, rise_f, rmise_x, rmse_y


logger = logging.getLogger(__name__)

METHODS = ("mcmc", "vb", "vb-mcmc", "mcmc-truex", "pace", "flm", "flm-truex")
METRICS = ("rmise_x", "rise_f", "rmse_y", "wall_time")


class SimulationSettings:
    """
    Fitter settings shared by every replication.

    Parameters
    ----------
    mcmc_iters : int, default: 1000
        Sweeps of every MCMC fit.
    mcmc_burnin : int, default: 500
        Burn-in of every MCMC fit.
    vb_tol : float, default: 1e-6
        Relative bound change declaring VB convergence.
    vb_max_iter : int, default: 200
        Maximum VB sweeps.
    basis : BasisOptions, optional
        Surface basis settings.
    hyper : Hyperparameters, optional
        Prior hyperparameters.
    pve : float, default: 0.99
        FPCA variance-explained target.
    max_components : int or None, default: 4
        FPCA component cap, the true number of components; None leaves it to `pve`.
    surface_size : int, default: 40
        Points per axis of the surface evaluation grid.
    """

    def __init__(
        self,
        mcmc_iters: int = 1000,
        mcmc_burnin: int = 500,
        vb_tol: float = 1e-6,
        vb_max_iter: int = 200,
        basis: BasisOptions | None = None,
        hyper: Hyperparameters | None = None,
        pve: float = 0.99,
        max_components: int | None = N_COMPONENTS,
        surface_size: int = 40,
    ) -> None:
        self.mcmc_iters = mcmc_iters
        self.mcmc_burnin = mcmc_burnin
        self.vb_tol = vb_tol
        self.vb_max_iter = vb_max_iter
        self.basis = BasisOptions() if basis is None else basis
        self.hyper = Hyperparameters() if hyper is None else hyper
        self.pve = pve
        self.max_components = max_components
        self.surface_size = surface_size

    def mcmc_config(self, seed: int, update_scores: bool = True) -> McmcConfig:
        """Sampler settings of one fit."""
        return McmcConfig(self.mcmc_iters, self.mcmc_burnin, seed=seed, hyper=self.hyper, basis=self.basis, update_scores=update_scores)

    def vb_config(self, update_scores: bool = True) -> VbConfig:
        """Variational settings of one fit."""
        return VbConfig(self.vb_tol, self.vb_max_iter, hyper=self.hyper, basis=self.basis, update_scores=update_scores)

    def __repr__(self) -> str:
        return f"SimulationSettings(mcmc_iters={self.mcmc_iters}, mcmc_burnin={self.mcmc_burnin}, vb_max_iter={self.vb_max_iter})"


class _MethodFit:
    """Estimated training curves, surface and test predictions of one method."""

    def __init__(self, trajectories: FloatArray, surface: FloatArray, predictions: FloatArray) -> None:
        self.trajectories = trajectories
        self.surface = surface
        self.predictions = predictions


class _Replication:
    """Data and shared quantities of one simulated dataset."""

    def __init__(self, scenario: Scenario, settings: SimulationSettings) -> None:
        self.scenario = scenario
        self.settings = settings
        data, self.truth = generate_dataset(scenario)
        self.train_idx = np.arange(scenario.n_train)
        self.test_idx = np.arange(scenario.n_train, scenario.n_subjects)
        self.train: SparseFunctionalDataset = data.subset(self.train_idx)
        self.test = [data.subjects[i] for i in self.test_idx]
        self.y_test = data.y[self.test_idx]

        true_train = self.truth.trajectories[self.train_idx]
        size = settings.surface_size
        self.x_axis = np.linspace(true_train.min(), true_train.max(), size)
        self.t_axis = np.linspace(*scenario.domain, size)
        self.true_surface = self.truth.surface(self.x_axis, self.t_axis)
        self.mask = hull_mask(true_train, self.truth.grid.t, self.x_axis, self.t_axis)

        options = FpcaOptions(grid_size=scenario.grid_size, pve=settings.pve, max_components=settings.max_components, domain=scenario.domain)
        started = time.perf_counter()
        self.fpca: FpcaResult = pace_init(self.train, options)
        self.fpca_time = time.perf_counter() - started

    def evaluate(self, fit: _MethodFit) -> dict[str, float]:
        return {
            "rmise_x": rmise_x(self.truth.trajectories, fit.trajectories, self.truth.grid, self.train_idx),
            "rise_f": rise_f(self.true_surface, fit.surface, self.mask),
            "rmse_y": rmse_y(self.y_test, fit.predictions),
        }


def _fit_mcmc(rep: _Replication) -> _MethodFit:
    samples = run_mcmc(rep.train, rep.fpca, rep.settings.mcmc_config(rep.scenario.seed))
    predictions = predict_mcmc(samples, rep.test)["mean"].to_numpy()
    return _MethodFit(samples.trajectories(), samples.surface(rep.x_axis, rep.t_axis)[0], predictions)


def _fit_vb(rep: _Replication) -> _MethodFit:
    state = run_vb(rep.train, rep.fpca, rep.settings.vb_config())
    predictions = predict_vb(state, rep.test)["mean"].to_numpy()
    return _MethodFit(state.trajectories(), state.surface(rep.x_axis, rep.t_axis)[0], predictions)


def _fit_vb_mcmc(rep: _Replication) -> _MethodFit:
    state = run_vb(rep.train, rep.fpca, rep.settings.vb_config())
    samples = run_mcmc(rep.train, rep.fpca, rep.settings.mcmc_config(rep.scenario.seed), warm_start=state, model=state.model)
    predictions = predict_mcmc(samples, rep.test)["mean"].to_numpy()
    return _MethodFit(samples.trajectories(), samples.surface(rep.x_axis, rep.t_axis)[0], predictions)


def _fit_mcmc_truex(rep: _Replication) -> _MethodFit:
    oracle = rep.truth.oracle_fpca(rep.train_idx)
    samples = run_mcmc(rep.train, oracle, rep.settings.mcmc_config(rep.scenario.seed, update_scores=False))
    rows, _ = samples.model.design.rows(rep.truth.trajectories[rep.test_idx])
    predictions = rows @ samples.theta().mean(axis=0)
    return _MethodFit(samples.trajectories(), samples.surface(rep.x_axis, rep.t_axis)[0], predictions)


def _fit_pace(rep: _Replication) -> _MethodFit:
    state = run_vb(rep.train, rep.fpca, rep.settings.vb_config(update_scores=False))
    predictions = predict_vb(state, rep.test)["mean"].to_numpy()
    return _MethodFit(rep.fpca.trajectories(), state.surface(rep.x_axis, rep.t_axis)[0], predictions)


def _fit_flm(rep: _Replication) -> _MethodFit:
    trajectories = rep.fpca.trajectories()
    fit = flm_baseline(trajectories, rep.train.y, rep.fpca.grid, kt=rep.settings.basis.kt, dt=rep.settings.basis.dt)
    test_scores = np.array([rep.fpca.blup(subject) for subject in rep.test])
    predictions = fit.predict(rep.fpca.trajectories(test_scores))
    return _MethodFit(trajectories, fit.surface(rep.x_axis, rep.t_axis), predictions)


def _fit_flm_truex(rep: _Replication) -> _MethodFit:
    trajectories = rep.truth.trajectories[rep.train_idx]
    fit = flm_baseline(trajectories, rep.train.y, rep.truth.grid, kt=rep.settings.basis.kt, dt=rep.settings.basis.dt)
    predictions = fit.predict(rep.truth.trajectories[rep.test_idx])
    return _MethodFit(trajectories, fit.surface(rep.x_axis, rep.t_axis), predictions)


_FITTERS: dict[str, Callable[[_Replication], _MethodFit]] = {
    "mcmc": _fit_mcmc,
    "vb": _fit_vb,
    "vb-mcmc": _fit_vb_mcmc,
    "mcmc-truex": _fit_mcmc_truex,
    "pace": _fit_pace,
    "flm": _fit_flm,
    "flm-truex": _fit_flm_truex,
}

# methods that start from the sparse-data FPCA and are charged its run time
_USES_FPCA = frozenset({"mcmc", "vb", "vb-mcmc", "pace", "flm"})


def replication_seed(seed: int, replication: int) -> int:
    """
    Dataset seed of one replication.

    Parameters
    ----------
    seed : int
        Root seed of the scenario.
    replication : int
        Replication index.

    Returns
    -------
    int
        Non-negative seed, distinct across replications.
    """
    return int(np.random.SeedSequence([seed, replication]).generate_state(1)[0])


def run_replication(scenario: Scenario, methods: Sequence[str], settings: SimulationSettings | None = None, replication: int = 0) -> pd.DataFrame:
    """
    Fit the requested methods to one simulated dataset.

    Parameters
    ----------
    scenario : Scenario
        Scenario whose seed generates the dataset.
    methods : sequence of str
        Subset of :py:data:`METHODS`.
    settings : SimulationSettings, optional
        Fitter settings.
    replication : int, default: 0
        Replication index written to the table.

    Returns
    -------
    pandas.DataFrame
        Long table with columns ``scenario``, ``replication``, ``seed``, ``method``,
        ``metric`` and ``value``.
    """
    settings = SimulationSettings() if settings is None else settings
    unknown = sorted(set(methods) - set(METHODS))
    if unknown:
        raise ValueError(f"Invalid methods: {unknown}. Must be among {list(METHODS)}.")

    rep = _Replication(scenario, settings)
    records = []
    for method in methods:
        started = time.perf_counter()
        fit = _FITTERS[method](rep)
        elapsed = time.perf_counter() - started + (rep.fpca_time if method in _USES_FPCA else 0.0)
        values = rep.evaluate(fit) | {"wall_time": elapsed}
        logger.info("%s replication %d %s: %s", scenario.label(), replication, method, ", ".join(f"{k} {v:.4g}" for k, v in values.items()))
        records.extend(
            {"scenario": scenario.label(), "replication": replication, "seed": scenario.seed, "method": method, "metric": metric, "value": values[metric]}
            for metric in METRICS
        )
    return pd.DataFrame.from_records(records, columns=["scenario", "replication", "seed", "method", "metric", "value"])


def run_scenario(
    scenario: Scenario,
    methods: Sequence[str] = METHODS,
    replications: int = 100,
    settings: SimulationSettings | None = None,
    n_jobs: int = 1,
) -> pd.DataFrame:
    """
    Replicate a scenario and collect every metric of every method.

    Parameters
    ----------
    scenario : Scenario
        Scenario; its seed is the root of the replication seeds.
    methods : sequence of str, default: METHODS
        Methods to compare.
    replications : int, default: 100
        Number of simulated datasets.
    settings : SimulationSettings, optional
        Fitter settings.
    n_jobs : int, default: 1
        Parallel replications (joblib workers).

    Returns
    -------
    pandas.DataFrame
        Concatenated per-replication tables; identical for a fixed seed apart from ``wall_time``.
    """
    if replications < 1:
        raise ValueError(f"Invalid replications: {replications}. Must be at least 1.")
    settings = SimulationSettings() if settings is None else settings
    tasks = (delayed(run_replication)(scenario.with_seed(replication_seed(scenario.seed, r)), methods, settings, r) for r in range(replications))
    tables = Parallel(n_jobs=n_jobs)(tasks)
    return pd.concat(tables, ignore_index=True)


def summarize(metrics: pd.DataFrame) -> pd.DataFrame:
    """
    Median of every metric over replications.

    Parameters
    ----------
    metrics : pandas.DataFrame
        Output of :py:func:`run_scenario`.

    Returns
    -------
    pandas.DataFrame
        Columns ``scenario``, ``method``, ``metric``, ``median`` and ``replications``.
    """
    grouped = metrics.groupby(["scenario", "method", "metric"], sort=True)["value"]
    return grouped.agg(median="median", replications="count").reset_index()
