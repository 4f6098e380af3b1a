"""
Synthetic sparse functional data with known regression surfaces.

Trajectories are ``X(t) = Σ_j ξ_j φ_j(t)`` with ``ξ_j ~ N(0, 8 j^-2)`` and the four
eigenfunctions ``sin(πt/|T|)``, ``cos(πt/|T|)``, ``sin(2πt/|T|)``, ``cos(2πt/|T|)``, generated on
50 equally spaced points. Each subject is observed at ``J`` distinct grid points with
additive Gaussian noise of variance ``sigma_x2``, and its response is ``∫ F(X(t), t) dt + N(0, 1)``.
"""

from __future__ import annotations
from collections.abc import Callable

import numpy as np

from ..fitting.fpca import FpcaResult
from ..helpers.auxiliary import FloatArray
from ..helpers.basis import WorkingGrid
from ..helpers.dataset import SparseFunctionalDataset, Subject
from ..helpers.statistics import spawn_generators


def surface_f1(x: FloatArray, t: FloatArray) -> FloatArray:
    """Linear surface ``2 x sin(πt)`` on ``[0, 1]``."""
    return 2.0 * x * np.sin(np.pi * t)


def surface_f2(x: FloatArray, t: FloatArray) -> FloatArray:
    """Non-linear surface ``20 cos(-x/8 + t/4 - 5)`` on ``[0, 10]``."""
    return 20.0 * np.cos(-x / 8.0 + t / 4.0 - 5.0)


SURFACES: dict[str, tuple[Callable[[FloatArray, FloatArray], FloatArray], tuple[float, float]]] = {
    "F1": (surface_f1, (0.0, 1.0)),
    "F2": (surface_f2, (0.0, 10.0)),
}

N_COMPONENTS = 4


def true_surface(name: str, x: FloatArray, t: FloatArray) -> FloatArray:
    """
    Evaluate a named surface pointwise.

    Parameters
    ----------
    name : {"F1", "F2"}
        Surface name.
    x : numpy.ndarray
        Trajectory values.
    t : numpy.ndarray
        Times inside the surface's domain; broadcast against `x`.

    Returns
    -------
    numpy.ndarray
        ``F(x, t)``.

    Raises
    ------
    ValueError
        If the name is unknown or a time lies outside the domain.
    """
    if name not in SURFACES:
        raise ValueError(f"Invalid surface: {name}. Must be one of {sorted(SURFACES)}.")
    func, (lo, hi) = SURFACES[name]
    t = np.asarray(t, dtype=float)
    if np.any(t < lo) or np.any(t > hi):
        raise ValueError(f"Invalid t: values outside the domain [{lo}, {hi}] of {name}.")
    return func(np.asarray(x, dtype=float), t)


def eigenfunctions(t: FloatArray, domain: tuple[float, float]) -> FloatArray:
    """
    The four generating eigenfunctions.

    Parameters
    ----------
    t : numpy.ndarray
        Evaluation times.
    domain : tuple of float
        Time domain; only its length enters.

    Returns
    -------
    numpy.ndarray
        Matrix of shape ``(len(t), 4)``.
    """
    t = np.asarray(t, dtype=float)
    angle = np.pi * t / (domain[1] - domain[0])
    return np.column_stack([np.sin(angle), np.cos(angle), np.sin(2 * angle), np.cos(2 * angle)])


class Scenario:
    """
    One cell of the simulation design.

    Parameters
    ----------
    surface : {"F1", "F2"}, default: "F1"
        True regression surface.
    n_points : int, default: 10
        Observations per subject ``J``.
    sigma_x2 : float, default: 1.0
        Variance of the measurement error; the design uses 0, 1 and 4.
    n_subjects : int, default: 100
        Subjects per dataset.
    train_fraction : float, default: 2/3
        Fraction of subjects used for fitting.
    seed : int, default: 0
        Seed of the dataset.
    grid_size : int, default: 50
        Size of the generation grid.
    """

    def __init__(
        self,
        surface: str = "F1",
        n_points: int = 10,
        sigma_x2: float = 1.0,
        n_subjects: int = 100,
        train_fraction: float = 2.0 / 3.0,
        seed: int = 0,
        grid_size: int = 50,
    ) -> None:
        if surface not in SURFACES:
            raise ValueError(f"Invalid surface: {surface}. Must be one of {sorted(SURFACES)}.")
        if not 1 <= n_points <= grid_size:
            raise ValueError(f"Invalid n_points: {n_points}. Must be between 1 and the grid size {grid_size}.")
        if not 0 < train_fraction < 1:
            raise ValueError(f"Invalid train_fraction: {train_fraction}. Must be in (0, 1).")
        if sigma_x2 < 0:
            raise ValueError(f"Invalid sigma_x2: {sigma_x2}. Must be zero or positive.")
        self.surface = surface
        self.n_points = n_points
        self.sigma_x2 = sigma_x2
        self.n_subjects = n_subjects
        self.train_fraction = train_fraction
        self.seed = seed
        self.grid_size = grid_size

    @property
    def domain(self) -> tuple[float, float]:
        """Time domain of the surface."""
        return SURFACES[self.surface][1]

    @property
    def n_train(self) -> int:
        """Number of fitting subjects."""
        return int(round(self.train_fraction * self.n_subjects))

    def with_seed(self, seed: int) -> Scenario:
        """Copy with another seed."""
        return Scenario(self.surface, self.n_points, self.sigma_x2, self.n_subjects, self.train_fraction, seed, self.grid_size)

    def label(self) -> str:
        """Short identifier such as ``F1_J10_sx1``."""
        return f"{self.surface}_J{self.n_points}_sx{self.sigma_x2:g}"

    def __repr__(self) -> str:
        return f"Scenario(surface={self.surface!r}, n_points={self.n_points}, sigma_x2={self.sigma_x2}, n_subjects={self.n_subjects}, seed={self.seed})"


class GroundTruth:
    """
    Everything the generator knows about a dataset.

    Parameters
    ----------
    scenario : Scenario
        Generating scenario.
    grid : WorkingGrid
        Generation grid.
    scores : numpy.ndarray
        True scores ``(N, 4)``.
    signal : numpy.ndarray
        Noise-free responses ``∫ F(X(t), t) dt``.
    """

    def __init__(self, scenario: Scenario, grid: WorkingGrid, scores: FloatArray, signal: FloatArray) -> None:
        self.scenario = scenario
        self.grid = grid
        self.scores = scores
        self.signal = signal
        self.phi = eigenfunctions(grid.t, scenario.domain)
        self.trajectories = scores @ self.phi.T

    def surface(self, x: FloatArray, t: FloatArray) -> FloatArray:
        """True surface on the rectangular grid ``x × t``."""
        return true_surface(self.scenario.surface, np.asarray(x)[:, None], np.asarray(t)[None, :])

    def oracle_fpca(self, indices: FloatArray | range) -> FpcaResult:
        """
        FPCA result built from the true trajectories of some subjects.

        Eigenfunctions are normalized under the grid quadrature and the scores rescaled
        accordingly, so ``trajectories()`` reproduces the truth exactly.

        Parameters
        ----------
        indices : sequence of int
            Subjects to include.

        Returns
        -------
        FpcaResult
            Zero mean, the generating eigenfunctions and the true scores.
        """
        indices = np.asarray(indices, dtype=int)
        norms = np.sqrt(self.grid.integrate(self.phi.T**2))
        nu = 8.0 / np.arange(1, N_COMPONENTS + 1) ** 2 * norms**2
        return FpcaResult(
            self.grid,
            np.zeros(self.grid.size),
            self.phi / norms,
            nu,
            max(self.scenario.sigma_x2, 1e-6),
            self.scores[indices] * norms,
            diagnostics={"oracle": True},
        )


def generate_dataset(scenario: Scenario) -> tuple[SparseFunctionalDataset, GroundTruth]:
    """
    Draw one dataset.

    Parameters
    ----------
    scenario : Scenario
        Generating scenario.

    Returns
    -------
    tuple of (SparseFunctionalDataset, GroundTruth)
        Sparse noisy observations with noisy responses, and the truth behind them.
    """
    rng = spawn_generators(scenario.seed, 1)[0]
    grid = WorkingGrid.uniform(*scenario.domain, scenario.grid_size)
    sd = np.sqrt(8.0) / np.arange(1, N_COMPONENTS + 1)
    scores = rng.standard_normal((scenario.n_subjects, N_COMPONENTS)) * sd
    trajectories = scores @ eigenfunctions(grid.t, scenario.domain).T
    signal = grid.integrate(true_surface(scenario.surface, trajectories, grid.t[None, :]))
    response = signal + rng.standard_normal(scenario.n_subjects)

    width = len(str(scenario.n_subjects))
    subjects = []
    for i in range(scenario.n_subjects):
        where = np.sort(rng.choice(scenario.grid_size, size=scenario.n_points, replace=False))
        values = trajectories[i, where] + np.sqrt(scenario.sigma_x2) * rng.standard_normal(scenario.n_points)
        subjects.append(Subject(f"s{i + 1:0{width}d}", grid.t[where], values, response=response[i]))
    return SparseFunctionalDataset(subjects), GroundTruth(scenario, grid, scores, signal)
