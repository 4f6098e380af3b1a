"""Auxiliary types, exceptions and argument decorators."""

from __future__ import annotations
import inspect
from collections.abc import Callable, Sequence
from functools import wraps
from typing import Any, TypeAlias

import numpy as np
import numpy.typing as npt
import pandas as pd


# --- DATA TYPES ---
FloatArray: TypeAlias = npt.NDArray[np.float64]
IntArray: TypeAlias = npt.NDArray[np.int64]
BoolArray: TypeAlias = npt.NDArray[np.bool_]

ScalarFloatType: TypeAlias = float | np.floating
SequenceFloatType: TypeAlias = Sequence[float] | npt.NDArray[np.floating] | pd.Series | np.ndarray
MatrixFloatType: TypeAlias = Sequence[Sequence[float]] | npt.NDArray[np.floating] | pd.DataFrame

# --- CLI EXIT CODES ---
EXIT_OK: int = 0
EXIT_USAGE: int = 1
EXIT_DATA: int = 2
EXIT_NUMERICAL: int = 3


class DatasetError(ValueError):
    """
    Malformed or inconsistent input data.

    Parameters
    ----------
    message : str
        Description of the problem.
    path : str, optional
        File the problem was found in.
    line : int, optional
        1-based line number in `path` (header is line 1).
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None) -> None:
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f", line {line}"
            location += ": "
        super().__init__(f"{location}{message}")


class FittingError(RuntimeError):
    """
    Numerical failure inside one of the fitters.

    Parameters
    ----------
    message : str
        Description of the failure.
    module : str
        Name of the fitter that failed (e.g. ``"mcmc"``).
    iteration : int, optional
        Iteration at which the failure occurred.
    """

    def __init__(self, message: str, module: str, iteration: int | None = None) -> None:
        self.module = module
        self.iteration = iteration
        where = module if iteration is None else f"{module}, iteration {iteration}"
        super().__init__(f"[{where}] {message}")


def check_positive(**values: float) -> None:
    """
    Raise if any keyword value is not strictly positive and finite.

    Parameters
    ----------
    **values : float
        Named values to check.

    Raises
    ------
    ValueError
        If any value is non-finite or not greater than zero.
    """
    for name, value in values.items():
        if not np.isfinite(value) or value <= 0:
            raise ValueError(f"Invalid {name}: {value}. Must be positive.")


def inspect_arrays(*params: str, ndim: int = 1, same_length: bool = True) -> Callable[..., Any]:
    r"""
    Decorator to convert named function parameters to float NumPy arrays.

    Parameters
    ----------
    \*params : str
        Names of the parameters to convert.
    ndim : int, default: 1
        Required number of dimensions of every converted array.
    same_length : bool, default: True
        If True, all converted arrays must have the same length along their first axis.

    Returns
    -------
    Callable[..., Any]
        Decorator converting and validating the named parameters before the call.

    Raises
    ------
    ValueError
        If a parameter is not part of the function signature, has the wrong number of
        dimensions, or the lengths do not match.

    Examples
    --------
    >>> @inspect_arrays("a", "b")
    ... def add_arrays(a, b):
    ...     return a + b

    >>> add_arrays([1, 2, 3], [4, 5, 6])
    array([5., 7., 9.])
    """

    def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
        signature = inspect.signature(func)
        for param in params:
            if param not in signature.parameters:
                raise ValueError(f"Parameter '{param}' is not a valid parameter of {func.__name__}.")

        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            bound = signature.bind(*args, **kwargs)
            bound.apply_defaults()
            lengths = []
            for param in params:
                value = bound.arguments[param]
                if value is None:
                    continue
                arr = np.asarray(value, dtype=float)
                if arr.ndim != ndim:
                    raise ValueError(f"Invalid {param}: array with {arr.ndim} dimension(s). Must have {ndim}.")
                bound.arguments[param] = arr
                lengths.append(arr.shape[0])
            if same_length and any(length != lengths[0] for length in lengths):
                raise ValueError(f"Input {list(params)} must all have the same length.")
            return func(*bound.args, **bound.kwargs)

        return wrapper

    return decorator
