from __future__ import annotations

import numpy as np
import pytest

from sparse_fgam.helpers.auxiliary import DatasetError
from sparse_fgam.helpers.dataset import SparseFunctionalDataset, Subject, load_dataset, write_dataset


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def files(tmp_path):
    obs = _write(tmp_path / "obs.csv", "subject_id,t,value\ns1,0.5,1.0\ns1,0.1,2.0\ns2,0.3,-1.5\ns3,0.7,0.25\n")
    resp = _write(tmp_path / "resp.csv", "subject_id,y\ns2,3.0\ns1,-1.0\n")
    return obs, resp


def test_load_dataset(files):
    data = load_dataset(*files)
    assert data.ids == ["s2", "s1"]
    np.testing.assert_array_equal(data.y, [3.0, -1.0])
    assert data.n_offsets == 0
    assert data.offsets.shape == (2, 0)
    s1 = data.subjects[1]
    # times are sorted with their values
    np.testing.assert_array_equal(s1.times, [0.1, 0.5])
    np.testing.assert_array_equal(s1.values, [2.0, 1.0])
    assert [s.subject_id for s in data.unlabeled] == ["s3"]
    assert data.unlabeled[0].response is None


def test_load_dataset_offsets(tmp_path):
    obs = _write(tmp_path / "obs.csv", "subject_id,t,value\na,0,1\nb,1,2\n")
    resp = _write(tmp_path / "resp.csv", "subject_id,y,u1,u2\na,1,1,0.5\nb,2,1,-0.5\n")
    data = load_dataset(obs, resp)
    assert data.n_offsets == 2
    np.testing.assert_array_equal(data.offsets, [[1.0, 0.5], [1.0, -0.5]])


def test_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(3)
    subjects = [
        Subject("a", rng.uniform(size=4), rng.normal(size=4), response=rng.normal(), offsets=[rng.normal()]),
        Subject("b", rng.uniform(size=2), rng.normal(size=2), response=rng.normal(), offsets=[rng.normal()]),
    ]
    data = SparseFunctionalDataset(subjects)
    obs, resp = tmp_path / "obs.csv", tmp_path / "resp.csv"
    write_dataset(data, obs, resp)
    loaded = load_dataset(obs, resp)
    assert loaded.ids == data.ids
    np.testing.assert_array_equal(loaded.y, data.y)
    np.testing.assert_array_equal(loaded.offsets, data.offsets)
    for original, copy in zip(data.subjects, loaded.subjects, strict=True):
        np.testing.assert_array_equal(copy.times, original.times)
        np.testing.assert_array_equal(copy.values, original.values)


@pytest.mark.parametrize(
    "obs_text, resp_text, name, line, match",
    [
        ("subject_id,t,value\ns1,0.5,abc\n", "subject_id,y\ns1,1\n", "obs.csv", 2, "Non-numeric"),  # non_numeric_value
        ("subject_id,t,value\ns1,0.5,1\ns1,x,1\n", "subject_id,y\ns1,1\n", "obs.csv", 3, "Non-numeric"),  # non_numeric_time
        ("subject_id,t,value\ns1,0.5,1\n", "subject_id,y\ns1,nan\n", "resp.csv", 2, "Non-finite"),  # non_finite_response
        ("subject_id,t,value\ns1,0.5,1\ns1,0.5,2\n", "subject_id,y\ns1,1\n", "obs.csv", 3, "Duplicate"),  # duplicate_time
        ("subject_id,t,value\ns1,0.5,1\n", "subject_id,y\ns1,1\ns2,2\n", "resp.csv", 3, "no observations"),  # response_without_observations
        ("subject_id,t,value\ns1,0.5,1\n", "subject_id,y\ns1,1\ns1,2\n", "resp.csv", 3, "Duplicate response"),  # duplicate_response
    ],
)
def test_load_dataset_errors(tmp_path, obs_text, resp_text, name, line, match):
    obs = _write(tmp_path / "obs.csv", obs_text)
    resp = _write(tmp_path / "resp.csv", resp_text)
    with pytest.raises(DatasetError, match=match) as err:
        load_dataset(obs, resp)
    assert err.value.path.endswith(name)
    assert err.value.line == line
    assert f"line {line}" in str(err.value)


@pytest.mark.parametrize(
    "obs_text, resp_text",
    [
        ("subject,t,value\ns1,0.5,1\n", "subject_id,y\ns1,1\n"),  # missing_obs_header
        ("subject_id,t,value\ns1,0.5,1\n", "subject_id,response\ns1,1\n"),  # missing_resp_header
        ("", "subject_id,y\ns1,1\n"),  # empty_file
    ],
)
def test_load_dataset_header_errors(tmp_path, obs_text, resp_text):
    obs = _write(tmp_path / "obs.csv", obs_text)
    resp = _write(tmp_path / "resp.csv", resp_text)
    with pytest.raises(DatasetError):
        load_dataset(obs, resp)


def test_load_dataset_missing_file(tmp_path, files):
    with pytest.raises(DatasetError, match="File not found"):
        load_dataset(tmp_path / "missing.csv", files[1])


@pytest.mark.parametrize(
    "times, values, response",
    [
        ([], [], 1.0),  # no_observations
        ([0.1, 0.2], [1.0], 1.0),  # length_mismatch
        ([0.1, np.inf], [1.0, 2.0], 1.0),  # non_finite_time
        ([0.1, 0.1], [1.0, 2.0], 1.0),  # duplicate_time
        ([0.1], [1.0], np.nan),  # non_finite_response
    ],
)
def test_subject_invalid(times, values, response):
    with pytest.raises(DatasetError):
        Subject("s", times, values, response=response)


def test_dataset_invalid():
    a = Subject("a", [0.1], [1.0], response=1.0)
    with pytest.raises(DatasetError):
        SparseFunctionalDataset([])
    with pytest.raises(DatasetError):
        SparseFunctionalDataset([a, Subject("a", [0.2], [1.0], response=2.0)])
    with pytest.raises(DatasetError):
        SparseFunctionalDataset([a, Subject("b", [0.2], [1.0])])
    with pytest.raises(DatasetError):
        SparseFunctionalDataset([a, Subject("b", [0.2], [1.0], response=2.0, offsets=[1.0])])


def test_dataset_pooled_and_subset():
    data = SparseFunctionalDataset(
        [
            Subject("a", [0.3, 0.1], [1.0, 2.0], response=1.0),
            Subject("b", [0.9], [3.0], response=2.0),
            Subject("c", [0.5, 0.6], [4.0, 5.0], response=3.0),
        ]
    )
    times, values = data.pooled()
    np.testing.assert_array_equal(times, [0.1, 0.3, 0.9, 0.5, 0.6])
    np.testing.assert_array_equal(values, [2.0, 1.0, 3.0, 4.0, 5.0])
    assert data.time_range() == (0.1, 0.9)
    np.testing.assert_array_equal(data.n_obs, [2, 1, 2])
    subset = data.subset([2, 0])
    assert subset.ids == ["c", "a"]
    np.testing.assert_array_equal(subset.y, [3.0, 1.0])
