"""Helpers: spline bases, statistics and dataset I/O."""

from __future__ import annotations

from .auxiliary import DatasetError, FittingError
from .basis import (
    DifferencePenalty,
    SplineBasis,
    TensorDesign,
    WorkingGrid,
    bspline_deriv,
    bspline_eval,
    difference_matrix,
    quadrature_weights,
    tensor_design_row,
)
from .dataset import SparseFunctionalDataset, Subject, load_dataset, write_dataset


__all__ = [
    "DatasetError",
    "DifferencePenalty",
    "FittingError",
    "SparseFunctionalDataset",
    "SplineBasis",
    "Subject",
    "TensorDesign",
    "WorkingGrid",
    "bspline_deriv",
    "bspline_eval",
    "difference_matrix",
    "load_dataset",
    "quadrature_weights",
    "tensor_design_row",
    "write_dataset",
]
