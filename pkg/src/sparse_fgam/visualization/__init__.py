"""Figures of fitted surfaces, trajectories and VB convergence."""

from __future__ import annotations

from .plot_fit import plot_lower_bound, plot_surface, plot_trajectories


__all__ = [
    "plot_lower_bound",
    "plot_surface",
    "plot_trajectories",
]
