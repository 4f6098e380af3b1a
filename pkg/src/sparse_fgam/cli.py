"""
Command-line front end.

Loads a dataset, runs the FPCA initialization and the selected fitter(s), and writes the
CSV artifacts. Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations
import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

import pandas as pd

from . import __version__
from .artifacts import export_artifacts, write_csv
from .fitting.fpca import FpcaOptions, pace_init
from .fitting.mcmc import McmcConfig, predict_mcmc, run_mcmc
from .fitting.model import BasisOptions, Hyperparameters
from .fitting.vb import VbConfig, run_vb
from .helpers.auxiliary import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, DatasetError, FittingError
from .helpers.dataset import load_dataset
from .simulation.generator import N_COMPONENTS, Scenario
from .simulation.scenarios import SimulationSettings, run_scenario, summarize


logger = logging.getLogger(__name__)

MODES = ("pace", "mcmc", "vb", "vb-mcmc", "simulate", "predict")
DATA_MODES = frozenset({"pace", "mcmc", "vb", "vb-mcmc", "predict"})
WARM_START_ITERS = (1000, 500)
SIMULATION_GRID = (("F1", 10), ("F1", 40), ("F2", 10), ("F2", 40))
SIMULATION_REPLICATIONS = 20


class UsageExitParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> UsageExitParser:
    """
    Parser of every command-line flag.

    Returns
    -------
    UsageExitParser
        The parser.
    """
    parser = UsageExitParser(prog="sparse-fgam", description="Bayesian functional generalized additive models for sparse functional covariates.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--mode", choices=MODES, default="vb-mcmc", help="what to run (default: %(default)s)")
    parser.add_argument("--seed", metavar="N", type=int, default=0, help="root random seed (default: %(default)s)")

    io = parser.add_argument_group("Input/output")
    io.add_argument("--obs", metavar="FNAME", help="observation CSV with header subject_id,t,value")
    io.add_argument("--resp", metavar="FNAME", help="response CSV with header subject_id,y[,u1,...]")
    io.add_argument("--out", metavar="DIR", default="out", help="output directory (default: %(default)s)")

    basis = parser.add_argument_group("Surface basis")
    basis.add_argument("--kx", metavar="K", type=int, default=10, help="B-splines over trajectory values (default: %(default)s)")
    basis.add_argument("--kt", metavar="K", type=int, default=10, help="B-splines over time (default: %(default)s)")
    basis.add_argument("--dx", metavar="D", type=int, default=2, help="difference-penalty order in x (default: %(default)s)")
    basis.add_argument("--dt", metavar="D", type=int, default=2, help="difference-penalty order in t (default: %(default)s)")

    fpca = parser.add_argument_group("FPCA")
    fpca.add_argument("--grid-size", metavar="T", type=int, default=50, help="working-grid points (default: %(default)s)")
    fpca.add_argument("--pve", metavar="FRAC", type=float, default=0.99, help="variance-explained target (default: %(default)s)")
    fpca.add_argument("--max-pcs", metavar="M", type=int, default=None, help="cap on the number of components (simulate default: 4)")

    mcmc = parser.add_argument_group("MCMC")
    mcmc.add_argument("--iters", metavar="N", type=int, default=None, help="sweeps incl. burn-in (default: 10000; 1000 after a VB warm start)")
    mcmc.add_argument("--burnin", metavar="N", type=int, default=None, help="burn-in sweeps (default: 1000; 500 after a VB warm start)")
    mcmc.add_argument("--thin", metavar="N", type=int, default=1, help="thinning interval (default: %(default)s)")

    prior = parser.add_argument_group("Prior")
    prior.add_argument("--al", metavar="A", type=float, default=0.01, help="smoothing-parameter prior shape (default: %(default)s)")
    prior.add_argument("--bl", metavar="B", type=float, default=0.01, help="smoothing-parameter prior rate (default: %(default)s)")
    prior.add_argument("--ax", metavar="A", type=float, default=0.01, help="measurement-error variance prior shape (default: %(default)s)")
    prior.add_argument("--bx", metavar="B", type=float, default=0.01, help="measurement-error variance prior rate (default: %(default)s)")
    prior.add_argument("--as", dest="a_s", metavar="A", type=float, default=0.01, help="response variance prior shape (default: %(default)s)")
    prior.add_argument("--bs", dest="b_s", metavar="B", type=float, default=0.01, help="response variance prior rate (default: %(default)s)")
    prior.add_argument("--sigma-beta2", metavar="V", type=float, default=1e6, help="unpenalized coefficient prior variance (default: %(default)g)")
    prior.add_argument("--sigma-eta2", metavar="V", type=float, default=1e6, help="offset coefficient prior variance (default: %(default)g)")

    vb = parser.add_argument_group("Variational Bayes")
    vb.add_argument("--vb-tol", metavar="TOL", type=float, default=1e-6, help="relative bound change for convergence (default: %(default)g)")
    vb.add_argument("--vb-max-iter", metavar="N", type=int, default=200, help="maximum VB sweeps (default: %(default)s)")
    vb.add_argument("--laguerre-points", metavar="N", type=int, default=25, help="smoothing-parameter quadrature nodes (default: %(default)s)")
    return parser


class RunConfig:
    """
    Validated settings of one command-line run.

    Parameters
    ----------
    mode : str
        One of :py:data:`MODES`.
    obs : Path or None
        Observation file; required in data modes.
    resp : Path or None
        Response file; required in data modes.
    out : Path
        Output directory.
    seed : int
        Root seed.
    fpca : FpcaOptions
        FPCA settings.
    mcmc : McmcConfig
        Sampler settings.
    vb : VbConfig
        Variational settings.

    Raises
    ------
    ValueError
        If a data mode lacks an input path.
    """

    def __init__(self, mode: str, obs: Path | None, resp: Path | None, out: Path, seed: int, fpca: FpcaOptions, mcmc: McmcConfig, vb: VbConfig) -> None:
        if mode not in MODES:
            raise ValueError(f"Invalid mode: {mode}. Must be one of {list(MODES)}.")
        if mode in DATA_MODES and (obs is None or resp is None):
            raise ValueError(f"Mode {mode} requires --obs and --resp.")
        self.mode = mode
        self.obs = obs
        self.resp = resp
        self.out = out
        self.seed = seed
        self.fpca = fpca
        self.mcmc = mcmc
        self.vb = vb

    @classmethod
    def from_namespace(cls, args: argparse.Namespace) -> RunConfig:
        """
        Assemble the configuration from parsed flags.

        Parameters
        ----------
        args : argparse.Namespace
            Output of :py:func:`build_parser`.

        Returns
        -------
        RunConfig
            Validated configuration.

        Raises
        ------
        ValueError
            If any flag value is invalid.
        """
        basis = BasisOptions(kx=args.kx, kt=args.kt, dx=args.dx, dt=args.dt)
        hyper = Hyperparameters(
            a_s=args.a_s, b_s=args.b_s, a_x=args.ax, b_x=args.bx, a_l=args.al, b_l=args.bl, sigma_beta2=args.sigma_beta2, sigma_eta2=args.sigma_eta2
        )
        default_iters, default_burnin = WARM_START_ITERS if args.mode in ("vb-mcmc", "predict", "simulate") else (10000, 1000)
        iters = default_iters if args.iters is None else args.iters
        burnin = default_burnin if args.burnin is None else args.burnin
        return cls(
            mode=args.mode,
            obs=None if args.obs is None else Path(args.obs),
            resp=None if args.resp is None else Path(args.resp),
            out=Path(args.out),
            seed=args.seed,
            fpca=FpcaOptions(grid_size=args.grid_size, pve=args.pve, max_components=args.max_pcs),
            mcmc=McmcConfig(iters=iters, burnin=burnin, thin=args.thin, seed=args.seed, hyper=hyper, basis=basis),
            vb=VbConfig(tol=args.vb_tol, max_iter=args.vb_max_iter, laguerre_points=args.laguerre_points, hyper=hyper, basis=basis),
        )

    def __repr__(self) -> str:
        return f"RunConfig(mode={self.mode!r}, obs={self.obs}, resp={self.resp}, out={self.out}, seed={self.seed})"


def run_simulation(config: RunConfig) -> list[Path]:
    """
    Desk-scale simulation grid.

    Runs both surfaces at ``J = 10`` and ``J = 40`` with ``sigma_x2 = 1``, each with 20
    replications of 100 subjects and at most four components unless `--max-pcs` is given, and
    writes ``metrics.csv`` and ``summary.csv``.

    Parameters
    ----------
    config : RunConfig
        Configuration; the MCMC length, basis, prior and FPCA flags apply to every fit.

    Returns
    -------
    list of Path
        Written files.
    """
    settings = SimulationSettings(
        mcmc_iters=config.mcmc.iters,
        mcmc_burnin=config.mcmc.burnin,
        vb_tol=config.vb.tol,
        vb_max_iter=config.vb.max_iter,
        basis=config.mcmc.basis,
        hyper=config.mcmc.hyper,
        pve=config.fpca.pve,
        max_components=N_COMPONENTS if config.fpca.max_components is None else config.fpca.max_components,
    )
    tables = []
    for surface, n_points in SIMULATION_GRID:
        scenario = Scenario(surface=surface, n_points=n_points, sigma_x2=1.0, seed=config.seed, grid_size=config.fpca.grid_size)
        logger.info("Simulating %s.", scenario.label())
        tables.append(run_scenario(scenario, replications=SIMULATION_REPLICATIONS, settings=settings))
    metrics = pd.concat(tables, ignore_index=True)
    config.out.mkdir(parents=True, exist_ok=True)
    return [write_csv(metrics, config.out / "metrics.csv"), write_csv(summarize(metrics), config.out / "summary.csv")]


def _run(config: RunConfig) -> None:
    if config.mode == "simulate":
        run_simulation(config)
        return

    data = load_dataset(config.obs, config.resp)
    if config.mode == "predict" and not data.unlabeled:
        raise DatasetError("No subject without a response to predict.", path=str(config.obs))
    fpca = pace_init(data, config.fpca)

    vb = samples = predictions = None
    if config.mode in ("vb", "vb-mcmc", "predict"):
        vb = run_vb(data, fpca, config.vb)
    if config.mode in ("mcmc", "vb-mcmc", "predict"):
        samples = run_mcmc(data, fpca, config.mcmc, warm_start=vb, model=None if vb is None else vb.model)
    if config.mode == "predict":
        predictions = predict_mcmc(samples, data.unlabeled, include_noise=True, seed=config.seed)
    export_artifacts(config.out, data, fpca, config.mode, vb=vb, samples=samples, predictions=predictions, seed=config.seed)


def dispatch(config: RunConfig) -> int:
    """
    Run the configured mode and map failures to exit codes.

    Parameters
    ----------
    config : RunConfig
        Validated configuration.

    Returns
    -------
    int
        0 on success, 2 on data or output errors, 3 on numerical failures.
    """
    logger.info("Starting %r.", config)
    try:
        _run(config)
    except DatasetError as err:
        logger.error("Data error: %s", err)
        return EXIT_DATA
    except OSError as err:
        logger.error("Cannot write artifacts: %s", err)
        return EXIT_DATA
    except (FittingError, ValueError) as err:
        logger.error("Numerical failure: %s", err)
        return EXIT_NUMERICAL
    logger.info("Finished mode %s; artifacts in %s.", config.mode, config.out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """
    Entry point of the ``sparse-fgam`` command.

    Parameters
    ----------
    argv : sequence of str, optional
        Arguments without the program name; defaults to ``sys.argv[1:]``.

    Returns
    -------
    int
        Process exit status.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.captureWarnings(True)
    try:
        config = RunConfig.from_namespace(args)
    except ValueError as err:
        parser.error(str(err))
    return dispatch(config)


if __name__ == "__main__":
    sys.exit(main())
