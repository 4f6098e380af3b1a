"""Simulated datasets, accuracy metrics and replicated method comparisons."""

from __future__ import annotations

from .flm import FlmFit, flm_baseline, flm_design
from .generator import SURFACES, GroundTruth, Scenario, generate_dataset, true_surface
from .metrics import hull_mask, rise_f, rmise_x, rmse_y
from .scenarios import METHODS, SimulationSettings, replication_seed, run_replication, run_scenario, summarize


__all__ = [
    "METHODS",
    "SURFACES",
    "FlmFit",
    "GroundTruth",
    "Scenario",
    "SimulationSettings",
    "flm_baseline",
    "flm_design",
    "generate_dataset",
    "hull_mask",
    "replication_seed",
    "rise_f",
    "rmise_x",
    "rmse_y",
    "run_replication",
    "run_scenario",
    "summarize",
    "true_surface",
]
