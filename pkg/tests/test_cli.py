from __future__ import annotations

import pandas as pd
import pytest

from sparse_fgam import __version__, cli
from sparse_fgam.helpers.auxiliary import EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, FittingError
from sparse_fgam.helpers.dataset import write_dataset

from .helpers.problems import small_problem


@pytest.fixture
def inputs(tmp_path):
    data, _, _ = small_problem()
    obs, resp = tmp_path / "obs.csv", tmp_path / "resp.csv"
    write_dataset(data, obs, resp)
    return ["--obs", str(obs), "--resp", str(resp)]


@pytest.mark.parametrize(
    "argv",
    [
        ["--mode", "bogus"],  # unknown_mode
        ["--mode", "mcmc"],  # missing_inputs
        ["--mode", "simulate", "--thin", "0"],  # invalid_value
        ["--kx", "ten"],  # not_an_integer
    ],
)
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as err:
        cli.main(argv)
    assert err.value.code == EXIT_USAGE


def test_version(capsys):
    with pytest.raises(SystemExit) as err:
        cli.main(["--version"])
    assert err.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_missing_file(tmp_path):
    argv = ["--mode", "pace", "--obs", str(tmp_path / "missing.csv"), "--resp", str(tmp_path / "resp.csv"), "--out", str(tmp_path / "out")]
    assert cli.main(argv) == EXIT_DATA


def test_malformed_file(tmp_path, inputs):
    (tmp_path / "obs.csv").write_text("subject_id,t,value\ns001,0.1,abc\n")
    assert cli.main(["--mode", "pace", *inputs, "--out", str(tmp_path / "out")]) == EXIT_DATA


def test_predict_without_unlabeled_subjects(tmp_path, inputs):
    assert cli.main(["--mode", "predict", *inputs, "--out", str(tmp_path / "out")]) == EXIT_DATA


def test_numerical_failure(tmp_path, inputs, monkeypatch):
    def failing(data, fpca, config):
        raise FittingError("non-finite lower bound component 'response'", "vb", 4)

    monkeypatch.setattr(cli, "run_vb", failing)
    assert cli.main(["--mode", "vb", *inputs, "--out", str(tmp_path / "out"), "--max-pcs", "3"]) == EXIT_NUMERICAL


def test_pace_mode(tmp_path, inputs):
    out = tmp_path / "out"
    assert cli.main(["--mode", "pace", *inputs, "--out", str(out), "--max-pcs", "3"]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["fpca.csv", "runlog.txt", "scores.csv", "trajectories.csv"]
    assert (out / "runlog.txt").read_text().startswith("mode: pace\n")


def test_vb_mode(tmp_path, inputs):
    out = tmp_path / "out"
    argv = ["--mode", "vb", *inputs, "--out", str(out), "--kx", "6", "--kt", "6", "--max-pcs", "3", "--vb-max-iter", "5"]
    assert cli.main(argv) == EXIT_OK
    surface = pd.read_csv(out / "surface.csv")
    assert list(surface.columns) == ["x", "t", "F", "sd"]
    assert len(surface) == 40 * 40
    assert len(pd.read_csv(out / "bound.csv")) <= 5
    assert not (out / "samples.csv").exists()


@pytest.mark.parametrize(
    "mode, expected",
    [
        ("mcmc", (10000, 1000)),
        ("vb-mcmc", (1000, 500)),  # warm_start
    ],
)
def test_default_chain_length(mode, expected):
    args = cli.build_parser().parse_args(["--mode", mode, "--obs", "o.csv", "--resp", "r.csv"])
    config = cli.RunConfig.from_namespace(args)
    assert (config.mcmc.iters, config.mcmc.burnin) == expected
    assert config.vb.max_iter == 200


@pytest.mark.parametrize(
    "extra, expected",
    [
        ([], 4),  # true_number_of_components
        (["--max-pcs", "2"], 2),
    ],
)
def test_simulation_component_cap(tmp_path, monkeypatch, extra, expected):
    seen = []

    def fake_run_scenario(scenario, replications, settings):
        seen.append((scenario, replications, settings))
        return pd.DataFrame(
            {"scenario": [scenario.label()], "replication": [0], "seed": [scenario.seed], "method": ["flm"], "metric": ["rmse_y"], "value": [1.0]}
        )

    monkeypatch.setattr(cli, "run_scenario", fake_run_scenario)
    assert cli.main(["--mode", "simulate", "--out", str(tmp_path), *extra]) == EXIT_OK
    assert len(seen) == 4
    assert {settings.max_components for _, _, settings in seen} == {expected}
    assert {scenario.sigma_x2 for scenario, _, _ in seen} == {1.0}
    assert sorted(p.name for p in tmp_path.iterdir()) == ["metrics.csv", "summary.csv"]
