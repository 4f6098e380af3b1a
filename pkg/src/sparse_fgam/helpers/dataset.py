"""
Sparse functional datasets and their CSV representation.

Observations are stored in long format (``subject_id,t,value``) and responses in wide
format (``subject_id,y[,u1,...]``), where the optional ``u`` columns are offset covariates.
"""

from __future__ import annotations
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from .auxiliary import DatasetError, FloatArray, SequenceFloatType


logger = logging.getLogger(__name__)

OBSERVATION_COLUMNS = ("subject_id", "t", "value")
RESPONSE_COLUMNS = ("subject_id", "y")


class Subject:
    """
    Irregularly sampled, noisy trajectory of one subject with its scalar response.

    Parameters
    ----------
    subject_id : str
        Identifier.
    times : sequence of float
        Observation times; sorted on construction.
    values : sequence of float
        Noisy trajectory values at `times`.
    response : float, optional
        Scalar response; None for prediction targets.
    offsets : sequence of float, optional
        Offset covariates ``u_i``.

    Raises
    ------
    DatasetError
        If there are no observations, lengths differ, values are not finite or a time is repeated.
    """

    def __init__(
        self,
        subject_id: str,
        times: SequenceFloatType,
        values: SequenceFloatType,
        response: float | None = None,
        offsets: SequenceFloatType = (),
    ) -> None:
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.size == 0:
            raise DatasetError(f"Subject {subject_id} has no observations.")
        if times.shape != values.shape or times.ndim != 1:
            raise DatasetError(f"Subject {subject_id}: times and values must be 1-dimensional and of equal length.")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise DatasetError(f"Subject {subject_id}: times and values must be finite.")
        order = np.argsort(times, kind="stable")
        times = times[order]
        if np.any(np.diff(times) == 0):
            raise DatasetError(f"Subject {subject_id} has duplicate observation times.")
        if response is not None and not np.isfinite(response):
            raise DatasetError(f"Subject {subject_id} has a non-finite response: {response}.")

        self.subject_id = str(subject_id)
        self.times = times
        self.values = values[order]
        self.response = None if response is None else float(response)
        self.offsets = np.asarray(offsets, dtype=float).ravel()

    @property
    def n_obs(self) -> int:
        """Number of observations."""
        return int(self.times.size)

    def __repr__(self) -> str:
        return f"Subject(subject_id={self.subject_id!r}, n_obs={self.n_obs}, response={self.response})"


class SparseFunctionalDataset:
    """
    Collection of subjects sharing one offset design.

    Parameters
    ----------
    subjects : iterable of Subject
        Subjects with responses, used for fitting.
    unlabeled : iterable of Subject, optional
        Subjects without responses, kept as prediction targets.

    Raises
    ------
    DatasetError
        If a fitting subject lacks a response, identifiers repeat, or offset lengths differ.
    """

    def __init__(self, subjects: Iterable[Subject], unlabeled: Iterable[Subject] = ()) -> None:
        self.subjects = list(subjects)
        self.unlabeled = list(unlabeled)
        if not self.subjects:
            raise DatasetError("Dataset must contain at least one subject with a response.")
        ids = [s.subject_id for s in self.subjects + self.unlabeled]
        if len(set(ids)) != len(ids):
            raise DatasetError("Subject identifiers must be unique.")
        for subject in self.subjects:
            if subject.response is None:
                raise DatasetError(f"Subject {subject.subject_id} has no response.")
        n_offsets = {s.offsets.size for s in self.subjects}
        if len(n_offsets) > 1:
            raise DatasetError(f"All subjects must have the same number of offset covariates, got {sorted(n_offsets)}.")

    @property
    def n_subjects(self) -> int:
        """Number of fitting subjects ``N``."""
        return len(self.subjects)

    @property
    def n_offsets(self) -> int:
        """Number of offset covariates ``p0``."""
        return int(self.subjects[0].offsets.size)

    @property
    def ids(self) -> list[str]:
        """Subject identifiers in fitting order."""
        return [s.subject_id for s in self.subjects]

    @property
    def y(self) -> FloatArray:
        """Responses in fitting order."""
        return np.array([s.response for s in self.subjects], dtype=float)

    @property
    def offsets(self) -> FloatArray:
        """Offset design of shape ``(N, p0)``."""
        return np.array([s.offsets for s in self.subjects], dtype=float).reshape(self.n_subjects, self.n_offsets)

    @property
    def n_obs(self) -> FloatArray:
        """Observation counts ``n_i``."""
        return np.array([s.n_obs for s in self.subjects], dtype=int)

    def pooled(self) -> tuple[FloatArray, FloatArray]:
        """
        Pool all observations of the fitting subjects.

        Returns
        -------
        tuple of (numpy.ndarray, numpy.ndarray)
            Times and values of every observation.
        """
        return np.concatenate([s.times for s in self.subjects]), np.concatenate([s.values for s in self.subjects])

    def time_range(self) -> tuple[float, float]:
        """
        Range of the pooled observation times.

        Returns
        -------
        tuple of (float, float)
            Smallest and largest observation time.
        """
        times, _ = self.pooled()
        return float(times.min()), float(times.max())

    def subset(self, indices: Sequence[int]) -> SparseFunctionalDataset:
        """
        Dataset restricted to some fitting subjects.

        Parameters
        ----------
        indices : sequence of int
            Positions of the subjects to keep.

        Returns
        -------
        SparseFunctionalDataset
            New dataset without unlabeled subjects.
        """
        return SparseFunctionalDataset([self.subjects[i] for i in indices])

    def __repr__(self) -> str:
        return f"SparseFunctionalDataset(n_subjects={self.n_subjects}, n_offsets={self.n_offsets}, n_unlabeled={len(self.unlabeled)})"


def _parse_float_column(frame: pd.DataFrame, column: str, path: str) -> FloatArray:
    values = np.empty(len(frame))
    for position, text in enumerate(frame[column].to_numpy()):
        try:
            values[position] = float(text)
        except (TypeError, ValueError):
            raise DatasetError(f"Non-numeric value {text!r} in column '{column}'.", path=path, line=position + 2) from None
        if not np.isfinite(values[position]):
            raise DatasetError(f"Non-finite value {text!r} in column '{column}'.", path=path, line=position + 2)
    return values


def _read_table(path: str | Path, required: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", skipinitialspace=True)
    except FileNotFoundError:
        raise DatasetError("File not found.", path=str(path)) from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as err:
        raise DatasetError(f"Cannot parse file: {err}", path=str(path)) from None
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DatasetError(f"Missing required header column(s) {missing}; found {list(frame.columns)}.", path=str(path))
    return frame


def load_dataset(obs_path: str | Path, response_path: str | Path) -> SparseFunctionalDataset:
    """
    Read a dataset from an observation file and a response file.

    Parameters
    ----------
    obs_path : str or Path
        CSV with header ``subject_id,t,value``.
    response_path : str or Path
        CSV with header ``subject_id,y`` followed by optional offset columns.

    Returns
    -------
    SparseFunctionalDataset
        Subjects in response-file order; subjects that only appear in the observation file
        are returned as unlabeled prediction targets.

    Raises
    ------
    DatasetError
        On missing headers, non-numeric fields, duplicate ``(subject, t)`` rows, duplicate
        responses, or a response whose subject has no observations.
    """
    obs_path, response_path = str(obs_path), str(response_path)
    obs = _read_table(obs_path, OBSERVATION_COLUMNS)
    resp = _read_table(response_path, RESPONSE_COLUMNS)

    obs_t = _parse_float_column(obs, "t", obs_path)
    obs_x = _parse_float_column(obs, "value", obs_path)
    obs_ids = obs["subject_id"].str.strip().to_numpy()

    duplicated = pd.DataFrame({"id": obs_ids, "t": obs_t}).duplicated(keep="first").to_numpy()
    if duplicated.any():
        line = int(np.flatnonzero(duplicated)[0]) + 2
        raise DatasetError(f"Duplicate (subject, t) row for subject {obs_ids[line - 2]!r}.", path=obs_path, line=line)

    offset_columns = [c for c in resp.columns if c not in RESPONSE_COLUMNS]
    resp_y = _parse_float_column(resp, "y", response_path)
    resp_u = np.column_stack([_parse_float_column(resp, c, response_path) for c in offset_columns]) if offset_columns else np.zeros((len(resp), 0))
    resp_ids = resp["subject_id"].str.strip().to_numpy()

    groups: dict[str, list[int]] = {}
    for position, sid in enumerate(obs_ids):
        groups.setdefault(sid, []).append(position)

    subjects = []
    seen: set[str] = set()
    for position, sid in enumerate(resp_ids):
        if sid in seen:
            raise DatasetError(f"Duplicate response for subject {sid!r}.", path=response_path, line=position + 2)
        seen.add(sid)
        if sid not in groups:
            raise DatasetError(f"Subject {sid!r} has a response but no observations.", path=response_path, line=position + 2)
        rows = groups[sid]
        subjects.append(Subject(sid, obs_t[rows], obs_x[rows], response=resp_y[position], offsets=resp_u[position]))

    unlabeled = [Subject(sid, obs_t[rows], obs_x[rows]) for sid, rows in groups.items() if sid not in seen]
    if unlabeled:
        logger.info("%s subject(s) without a response kept as prediction targets.", len(unlabeled))
    logger.info("Loaded %s subjects with %s observations from %s.", len(subjects), len(obs_ids), obs_path)
    return SparseFunctionalDataset(subjects, unlabeled)


def write_dataset(data: SparseFunctionalDataset, obs_path: str | Path, response_path: str | Path) -> None:
    """
    Write a dataset in the format read by :py:func:`load_dataset`.

    Parameters
    ----------
    data : SparseFunctionalDataset
        Dataset to write; unlabeled subjects go to the observation file only.
    obs_path : str or Path
        Destination of the observation CSV.
    response_path : str or Path
        Destination of the response CSV.
    """
    everyone = data.subjects + data.unlabeled
    obs = pd.DataFrame(
        {
            "subject_id": np.concatenate([[s.subject_id] * s.n_obs for s in everyone]),
            "t": np.concatenate([s.times for s in everyone]),
            "value": np.concatenate([s.values for s in everyone]),
        }
    )
    resp = pd.DataFrame({"subject_id": data.ids, "y": data.y})
    for column in range(data.n_offsets):
        resp[f"u{column + 1}"] = data.offsets[:, column]
    obs.to_csv(obs_path, index=False, float_format="%.17g")
    resp.to_csv(response_path, index=False, float_format="%.17g")
