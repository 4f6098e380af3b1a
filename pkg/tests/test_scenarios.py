from __future__ import annotations

import numpy as np
import pytest

from sparse_fgam.fitting.model import BasisOptions
from sparse_fgam.simulation import scenarios
from sparse_fgam.simulation.generator import Scenario
from sparse_fgam.simulation.scenarios import (
    METHODS,
    METRICS,
    SimulationSettings,
    replication_seed,
    run_replication,
    run_scenario,
    summarize,
)


SCENARIO = Scenario(n_subjects=45, seed=5)


def _settings():
    return SimulationSettings(mcmc_iters=20, mcmc_burnin=10, vb_max_iter=20, basis=BasisOptions(kx=6, kt=6), max_components=3, surface_size=20)


@pytest.fixture(scope="module")
def table():
    return run_replication(SCENARIO, METHODS, _settings())


def test_replication_table(table):
    assert list(table.columns) == ["scenario", "replication", "seed", "method", "metric", "value"]
    assert len(table) == len(METHODS) * len(METRICS)
    assert set(table["method"]) == set(METHODS)
    assert set(table["metric"]) == set(METRICS)
    assert np.all(np.isfinite(table["value"]))
    assert np.all(table["value"] >= 0)
    assert set(table["scenario"]) == {"F1_J10_sx1"}
    assert set(table["seed"]) == {5}


def test_replication_is_deterministic(table):
    again = run_replication(SCENARIO, ["mcmc", "flm"], _settings())
    again = again[again["metric"] != "wall_time"].set_index(["method", "metric"])["value"]
    first = table[table["method"].isin(["mcmc", "flm"]) & (table["metric"] != "wall_time")].set_index(["method", "metric"])["value"]
    np.testing.assert_array_equal(again.sort_index().to_numpy(), first.sort_index().to_numpy())


def test_unknown_method():
    with pytest.raises(ValueError, match="Invalid methods"):
        run_replication(SCENARIO, ["mcmc", "gp"], _settings())


def test_run_scenario_and_summary():
    metrics = run_scenario(SCENARIO, ["flm"], replications=2, settings=_settings())
    assert len(metrics) == 2 * len(METRICS)
    assert sorted(set(metrics["replication"])) == [0, 1]
    assert metrics["seed"].nunique() == 2
    summary = summarize(metrics)
    assert list(summary.columns) == ["scenario", "method", "metric", "median", "replications"]
    assert len(summary) == len(METRICS)
    assert np.all(summary["replications"] == 2)


def test_run_scenario_invalid():
    with pytest.raises(ValueError, match="Invalid replications"):
        run_scenario(SCENARIO, ["flm"], replications=0)


def test_replication_seed():
    seeds = {replication_seed(1, r) for r in range(50)}
    assert len(seeds) == 50
    assert replication_seed(1, 3) == replication_seed(1, 3)
    assert replication_seed(1, 3) != replication_seed(2, 3)


def test_true_curve_baseline(table):
    values = table[table["method"] == "flm-truex"].set_index("metric")["value"]
    assert values["rmise_x"] == pytest.approx(0.0, abs=1e-12)


def test_simulation_uses_true_number_of_components():
    assert SimulationSettings().max_components == 4
    settings = SimulationSettings(pve=1.0)
    replication = scenarios._Replication(Scenario(n_subjects=60, seed=1), settings)
    assert replication.fpca.n_components == 4
