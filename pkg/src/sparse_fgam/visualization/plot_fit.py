"""
Plot fit outcomes.

Figures are returned for further editing and saved only when a filename is given.
"""

from __future__ import annotations
from collections.abc import Sequence
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import figure

from ..helpers.dataset import Subject


def _finish(fig: figure.Figure, filename: str | Path | None) -> figure.Figure:
    """
    Lay out the figure and save it if requested.

    Parameters
    ----------
    fig : Figure
        Figure to finish.
    filename : str or Path or None
        Filename to save the figure to. If None, the figure is not saved.

    Returns
    -------
    Figure
        The same figure.
    """
    fig.tight_layout()
    if filename is not None:
        fig.savefig(filename)
    return fig


def plot_surface(
    x: np.ndarray,
    t: np.ndarray,
    mean: np.ndarray,
    sd: np.ndarray | None = None,
    mask: np.ndarray | None = None,
    levels: int = 20,
    filename: str | Path | None = None,
) -> figure.Figure:
    """
    Filled contour plot of an estimated surface and, optionally, its pointwise standard deviation.

    Parameters
    ----------
    x : numpy.ndarray
        Trajectory-value axis of length ``nx``.
    t : numpy.ndarray
        Time axis of length ``nt``.
    mean : numpy.ndarray
        Surface of shape ``(nx, nt)``.
    sd : numpy.ndarray, optional
        Pointwise standard deviation, same shape as `mean`; adds a second panel.
    mask : numpy.ndarray, optional
        Cells to show (e.g. a convex-hull mask); others are left blank.
    levels : int, default: 20
        Number of contour levels.
    filename : str or Path, optional
        Filename to save the figure to. If None, the figure is not saved.

    Returns
    -------
    Figure
        The main figure object created by `plt.subplots()`.
    """
    panels = [("Estimated surface", np.asarray(mean, dtype=float))]
    if sd is not None:
        panels.append(("Pointwise standard deviation", np.asarray(sd, dtype=float)))

    fig, axes = plt.subplots(1, len(panels), figsize=(6 * len(panels), 5), squeeze=False)
    for ax, (title, values) in zip(axes[0], panels, strict=True):
        if mask is not None:
            values = np.where(mask, values, np.nan)
        contour = ax.contourf(t, x, values, levels=levels, cmap="viridis")
        fig.colorbar(contour, ax=ax)
        ax.set_title(title)
        ax.set_xlabel("t")
        ax.set_ylabel("x")
    return _finish(fig, filename)


def plot_trajectories(
    t: np.ndarray,
    trajectories: np.ndarray,
    subjects: Sequence[Subject] | None = None,
    max_curves: int = 10,
    filename: str | Path | None = None,
) -> figure.Figure:
    """
    Estimated trajectories with the sparse observations they were recovered from.

    Parameters
    ----------
    t : numpy.ndarray
        Working grid.
    trajectories : numpy.ndarray
        Curves of shape ``(N, len(t))``.
    subjects : sequence of Subject, optional
        Subjects in the same order; their observations are drawn as markers.
    max_curves : int, default: 10
        Number of leading subjects shown.
    filename : str or Path, optional
        Filename to save the figure to. If None, the figure is not saved.

    Returns
    -------
    Figure
        The main figure object created by `plt.subplots()`.
    """
    trajectories = np.atleast_2d(np.asarray(trajectories, dtype=float))
    fig, ax = plt.subplots(figsize=(9, 5))
    colours = plt.get_cmap("tab10")
    for i, curve in enumerate(trajectories[:max_curves]):
        colour = colours(i % 10)
        ax.plot(t, curve, color=colour, linewidth=1.2)
        if subjects is not None:
            ax.scatter(subjects[i].times, subjects[i].values, color=colour, s=12)
    ax.set_xlabel("t")
    ax.set_ylabel("X(t)")
    ax.set_title(f"Estimated trajectories ({min(max_curves, trajectories.shape[0])} of {trajectories.shape[0]})")
    return _finish(fig, filename)


def plot_lower_bound(trace: Sequence[float], filename: str | Path | None = None) -> figure.Figure:
    """
    Variational lower bound against the sweep number.

    Parameters
    ----------
    trace : sequence of float
        Bound after every sweep.
    filename : str or Path, optional
        Filename to save the figure to. If None, the figure is not saved.

    Returns
    -------
    Figure
        The main figure object created by `plt.subplots()`.
    """
    trace = np.asarray(trace, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(1, trace.size + 1), trace, marker="o", markersize=3)
    ax.set_xlabel("Iteration")
    ax.set_ylabel("Lower bound")
    return _finish(fig, filename)


plot_lower_bound.__module__ = "sparse_fgam.visualization"
plot_surface.__module__ = "sparse_fgam.visualization"
plot_trajectories.__module__ = "sparse_fgam.visualization"
