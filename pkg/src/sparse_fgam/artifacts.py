"""
CSV artifacts of a fit.

Every file is written to a temporary sibling first and then moved into place, so a rerun
replaces earlier outputs and an interrupted run never leaves a half-written file.
"""

from __future__ import annotations
import logging
import os
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from .fitting.fpca import FpcaResult
from .fitting.mcmc import PosteriorSamples
from .fitting.vb import VbState
from .helpers.auxiliary import FloatArray
from .helpers.dataset import SparseFunctionalDataset


logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class SurfaceExport:
    """
    Surface estimate on a rectangular ``(x, t)`` grid.

    Parameters
    ----------
    x : numpy.ndarray
        Trajectory-value axis.
    t : numpy.ndarray
        Time axis.
    mean : numpy.ndarray
        Estimate of shape ``(len(x), len(t))``.
    sd : numpy.ndarray
        Pointwise standard deviation, same shape as `mean`.

    Raises
    ------
    ValueError
        If the shapes are not rectangular or a standard deviation is negative.
    """

    def __init__(self, x: FloatArray, t: FloatArray, mean: FloatArray, sd: FloatArray) -> None:
        self.x = np.asarray(x, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.mean = np.asarray(mean, dtype=float)
        self.sd = np.asarray(sd, dtype=float)
        shape = (self.x.size, self.t.size)
        if self.mean.shape != shape or self.sd.shape != shape:
            raise ValueError(f"Invalid surface: shapes {self.mean.shape} and {self.sd.shape}. Must both be {shape}.")
        if np.any(self.sd < 0):
            raise ValueError("Invalid sd: values must be zero or positive.")

    @classmethod
    def from_fit(cls, fit: PosteriorSamples | VbState, size: int = 40) -> SurfaceExport:
        """
        Evaluate a fitted surface over the fitted trajectory range and the working grid.

        Parameters
        ----------
        fit : PosteriorSamples or VbState
            Completed fit.
        size : int, default: 40
            Points per axis.

        Returns
        -------
        SurfaceExport
            Mean and pointwise standard deviation.
        """
        x, t = fit.model.surface_axes(size)
        mean, sd = fit.surface(x, t)
        return cls(x, t, mean, sd)

    def to_frame(self) -> pd.DataFrame:
        """Rows ``x, t, F, sd`` with `x` varying slowest."""
        return pd.DataFrame(
            {
                "x": np.repeat(self.x, self.t.size),
                "t": np.tile(self.t, self.x.size),
                "F": self.mean.ravel(),
                "sd": self.sd.ravel(),
            }
        )

    def __repr__(self) -> str:
        return f"SurfaceExport(nx={self.x.size}, nt={self.t.size})"


def _temporary(path: Path) -> Path:
    return path.with_name(f".{path.name}.{os.getpid()}.tmp")


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """
    Atomically write a table.

    Parameters
    ----------
    frame : pandas.DataFrame
        Table to write without its index.
    path : str or Path
        Destination.

    Returns
    -------
    Path
        The destination.
    """
    path = Path(path)
    temporary = _temporary(path)
    try:
        frame.to_csv(temporary, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        temporary.replace(path)
    finally:
        temporary.unlink(missing_ok=True)
    return path


def write_text(lines: Sequence[str], path: str | Path) -> Path:
    """
    Atomically write lines of text.

    Parameters
    ----------
    lines : sequence of str
        Lines without terminators.
    path : str or Path
        Destination.

    Returns
    -------
    Path
        The destination.
    """
    path = Path(path)
    temporary = _temporary(path)
    try:
        temporary.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
        temporary.replace(path)
    finally:
        temporary.unlink(missing_ok=True)
    return path


def scores_frame(ids: Sequence[str], scores: FloatArray) -> pd.DataFrame:
    """Scores as ``subject_id, xi1, ..., xiM``."""
    frame = pd.DataFrame(np.atleast_2d(scores), columns=[f"xi{m + 1}" for m in range(np.atleast_2d(scores).shape[1])])
    frame.insert(0, "subject_id", list(ids))
    return frame


def trajectories_frame(ids: Sequence[str], t: FloatArray, trajectories: FloatArray) -> pd.DataFrame:
    """Curves in the long ``subject_id, t, value`` layout of the observation file."""
    return pd.DataFrame(
        {
            "subject_id": np.repeat(list(ids), t.size),
            "t": np.tile(t, len(ids)),
            "value": np.asarray(trajectories, dtype=float).ravel(),
        }
    )


def fpca_frame(fpca: FpcaResult) -> pd.DataFrame:
    """Mean and eigenfunctions on the working grid."""
    frame = pd.DataFrame({"t": fpca.grid.t, "mu": fpca.mu})
    for m in range(fpca.n_components):
        frame[f"phi{m + 1}"] = fpca.phi[:, m]
    return frame


def vb_summary_frame(state: VbState) -> pd.DataFrame:
    """
    Variational means and standard deviations of the scalar parameters.

    Parameters
    ----------
    state : VbState
        Fitted state.

    Returns
    -------
    pandas.DataFrame
        Columns ``param``, ``mean`` and ``sd``; ``sd`` is NaN where the factor has no finite one.
    """
    rows = []
    for name, mean, cov in (("eta0", state.mu_eta0, state.sigma_eta0), ("beta", state.mu_beta, state.sigma_beta), ("delta", state.mu_delta, state.sigma_delta)):
        rows.extend((f"{name}[{j}]", mean[j], np.sqrt(cov[j, j])) for j in range(mean.size))
    rows.append(("lambda_x", state.mu_lambda_x, np.nan))
    rows.append(("lambda_t", state.mu_lambda_t, np.nan))
    for name, shape, rate in (("sigma2", state.a_sigma2, state.b_sigma2), ("sigma_x2", state.a_sigma_x2, state.b_sigma_x2)):
        mean = rate / (shape - 1.0) if shape > 1 else np.nan
        sd = mean / np.sqrt(shape - 2.0) if shape > 2 else np.nan
        rows.append((name, mean, sd))
    return pd.DataFrame.from_records(rows, columns=["param", "mean", "sd"])


def runlog_lines(
    mode: str,
    fpca: FpcaResult,
    vb: VbState | None = None,
    samples: PosteriorSamples | None = None,
    seed: int | None = None,
) -> list[str]:
    """
    Human-readable run report.

    Parameters
    ----------
    mode : str
        CLI mode.
    fpca : FpcaResult
        FPCA initialization.
    vb : VbState, optional
        Variational fit.
    samples : PosteriorSamples, optional
        MCMC fit.
    seed : int, optional
        Root seed.

    Returns
    -------
    list of str
        Report lines.
    """
    lines = [f"mode: {mode}"]
    if seed is not None:
        lines.append(f"seed: {seed}")
    lines.append(f"fpca: components {fpca.n_components}, pve {fpca.pve:.6f}, sigma_x2 {fpca.sigma_x2:.6g}")
    lines.append("fpca eigenvalues: " + " ".join(f"{value:.6g}" for value in fpca.nu))
    lines.extend(f"fpca {key}: {value}" for key, value in sorted(fpca.diagnostics.items()))
    if vb is not None:
        lines.append(f"vb: iterations {vb.iterations}, converged {vb.converged}, bound {vb.bound_trace[-1]:.10g}")
        lines.append(f"vb: regularized score precisions {int(vb.regularized.sum())}, clamped trajectory values {int(vb.clamped.sum())}")
        lines.append(f"vb: elapsed {vb.elapsed:.3f} s")
    if samples is not None:
        rate = samples.acceptance_rate()
        lines.append(f"mcmc: stored draws {samples.n_draws}, iterations {int(samples.iteration[-1])}")
        lines.append(f"mcmc: acceptance mean {rate.mean():.4f}, min {rate.min():.4f}, max {rate.max():.4f}")
        lines.append(f"mcmc: clamped trajectory values {samples.n_clamped}")
        lines.append(f"mcmc: elapsed {samples.elapsed:.3f} s")
    return lines


def export_artifacts(
    outdir: str | Path,
    data: SparseFunctionalDataset,
    fpca: FpcaResult,
    mode: str,
    vb: VbState | None = None,
    samples: PosteriorSamples | None = None,
    predictions: pd.DataFrame | None = None,
    seed: int | None = None,
    surface_size: int = 40,
) -> list[Path]:
    """
    Write the artifacts of a completed run.

    The FPCA files are always written. The surface, score, fitted-value and trajectory
    files come from the MCMC fit when there is one and from the VB fit otherwise; the
    VB bound trace and summary are written whenever VB ran.

    Parameters
    ----------
    outdir : str or Path
        Output directory; created if missing.
    data : SparseFunctionalDataset
        Fitting data.
    fpca : FpcaResult
        FPCA initialization.
    mode : str
        CLI mode, recorded in the run log.
    vb : VbState, optional
        Variational fit.
    samples : PosteriorSamples, optional
        MCMC fit.
    predictions : pandas.DataFrame, optional
        Predictions for unlabeled subjects.
    seed : int, optional
        Root seed, recorded in the run log.
    surface_size : int, default: 40
        Points per axis of ``surface.csv``.

    Returns
    -------
    list of Path
        Written files in writing order.

    Raises
    ------
    OSError
        If the directory cannot be created or written.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ids, t = data.ids, fpca.grid.t
    written = [write_csv(fpca_frame(fpca), outdir / "fpca.csv")]

    fit = samples if samples is not None else vb
    if fit is None:
        written.append(write_csv(scores_frame(ids, fpca.scores), outdir / "scores.csv"))
        written.append(write_csv(trajectories_frame(ids, t, fpca.trajectories()), outdir / "trajectories.csv"))
    else:
        if samples is not None:
            scores, fitted = samples.scores.mean(axis=0), samples.fitted.mean(axis=0)
            written.append(write_csv(samples.long_format(), outdir / "samples.csv"))
            written.append(write_csv(samples.summary().rename_axis("param").reset_index(), outdir / "summary.csv"))
        else:
            scores, fitted = vb.modes, vb.fitted()
        written.append(write_csv(SurfaceExport.from_fit(fit, surface_size).to_frame(), outdir / "surface.csv"))
        written.append(write_csv(scores_frame(ids, scores), outdir / "scores.csv"))
        written.append(write_csv(pd.DataFrame({"subject_id": ids, "y": data.y, "fitted": fitted}), outdir / "fitted.csv"))
        written.append(write_csv(trajectories_frame(ids, t, fit.trajectories()), outdir / "trajectories.csv"))

    if vb is not None:
        bound = pd.DataFrame({"iteration": np.arange(1, len(vb.bound_trace) + 1), "bound": vb.bound_trace})
        written.append(write_csv(bound, outdir / "bound.csv"))
        written.append(write_csv(vb_summary_frame(vb), outdir / "vb_summary.csv"))
    if predictions is not None:
        written.append(write_csv(predictions, outdir / "predictions.csv"))
    written.append(write_text(runlog_lines(mode, fpca, vb, samples, seed), outdir / "runlog.txt"))
    logger.info("Wrote %s artifact(s) to %s.", len(written), outdir)
    return written
