"""Small simulated fitting problems shared by the fitter tests."""

from __future__ import annotations
from functools import lru_cache

from sparse_fgam.fitting import BasisOptions, FgamModel, FpcaOptions, pace_init
from sparse_fgam.simulation import Scenario, generate_dataset


SMALL_BASIS = BasisOptions(kx=6, kt=6)


@lru_cache(maxsize=4)
def small_problem(n_subjects: int = 40, n_points: int = 10, seed: int = 2):
    """
    Simulated F1 dataset with its ground truth and FPCA initialization.

    Returns
    -------
    tuple
        ``(data, truth, fpca)``; callers must not modify them.
    """
    data, truth = generate_dataset(Scenario(n_points=n_points, n_subjects=n_subjects, seed=seed))
    fpca = pace_init(data, FpcaOptions(domain=(0.0, 1.0), max_components=3))
    return data, truth, fpca


def small_model(**kwargs) -> FgamModel:
    """FGAM on :py:func:`small_problem` with a 6 x 6 surface basis."""
    data, _, fpca = small_problem(**kwargs)
    return FgamModel(data, fpca, SMALL_BASIS)
