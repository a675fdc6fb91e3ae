import numpy as np
import pytest

from roughheat import data as datagen
from roughheat.duhamel import duhamel_source
from roughheat.geometry import GridSpec, SpaceTimeField, TimeLadder
from roughheat.pipeline import (ScenarioConfig, linear_cauchy_scenario,
                                rd_wellposedness_scenario)


@pytest.fixture(scope="module")
def quick_config():
    return ScenarioConfig(name="test", dimension=1, grid_points=64,
                          horizon=0.5, ladder_depth=12, samples_per_rung=32,
                          coefficient_kind="checkerboard",
                          contrast=(1.0, 10.0), cells=8, rho=3.0, mu=-1.0,
                          p=4.0, q=6.0, r=4.5, amplitude=0.25, seed=1,
                          tol=1e-10)


def test_linear_scenario_end_to_end(quick_config):
    report = linear_cauchy_scenario(quick_config)
    stages = report["stages"]
    assert stages["weak_residual"]["ok"]
    assert stages["weak_residual"]["result"] <= 1e-4
    assert stages["initial_trace"]["ok"]
    pairs = stages["initial_trace"]["result"]
    # Duhamel trace pairings decay towards the initial time (the stage
    # lists heights in decreasing order of t)
    assert pairs[-1][1] < pairs[0][1]
    assert stages["regularity_table"]["ok"]
    assert all(np.isfinite(v)
               for v in stages["regularity_table"]["result"].values())
    assert stages["quadrature_stability"]["ok"]
    assert report["ok"]


def test_linear_superposition(quick_config):
    grid = quick_config.grid()
    ladder = quick_config.ladder()
    op = quick_config.operator()
    f1 = datagen.random_field(grid, ladder, seed=3, kind="bump")
    f2 = datagen.random_field(grid, ladder, seed=4, kind="noise")
    u1 = duhamel_source(op, f1)
    u2 = duhamel_source(op, f2)
    both = duhamel_source(op, SpaceTimeField(grid, ladder,
                                             f1.values + f2.values))
    scale = max(np.max(np.abs(u1.values)), np.max(np.abs(u2.values)))
    assert np.max(np.abs(both.values - u1.values - u2.values)) <= 1e-10 * scale


def test_rd_scenario_zero_data(quick_config):
    import dataclasses
    config = dataclasses.replace(quick_config, amplitude=0.0)
    report = rd_wellposedness_scenario(config)
    assert report["stages"]["picard"]["ok"]
    assert report["stages"]["picard"]["result"]["iterations"] == 1
    assert report["stages"]["lifespan"]["ok"]
    assert report["stages"]["lifespan"]["result"]["censored"]


def test_rd_scenario_full_loop(quick_config):
    report = rd_wellposedness_scenario(quick_config)
    stages = report["stages"]
    assert stages["picard"]["ok"]
    assert stages["picard"]["result"]["residual"] <= 1e-8
    assert stages["bootstrap_table"]["ok"]
    assert all(np.isfinite(v)
               for v in stages["bootstrap_table"]["result"].values())
    assert stages["weak_residual"]["ok"]
    assert stages["weak_residual"]["result"] <= 1e-4
    assert stages["reverse_holder"]["ok"]
    assert stages["uniqueness"]["ok"]
    assert stages["uniqueness"]["result"]["init_deviation"] <= 1e-8
    assert stages["lifespan"]["ok"]
    # defocusing run survives to the horizon
    assert stages["lifespan"]["result"]["censored"]


def test_rd_scenario_records_failures_and_continues():
    # data beyond the cubic evaluator's declared range: the solve stage
    # fails with RangeExceeded but the scenario still reports every stage
    config = ScenarioConfig(name="fail", dimension=1, grid_points=64,
                            horizon=0.5, ladder_depth=10,
                            samples_per_rung=4, nonlinearity="allen-cahn",
                            rho=2.0, amplitude=40.0, tol=1e-10,
                            p=4.0, q=6.0, r=4.5)
    report = rd_wellposedness_scenario(config)
    assert not report["stages"]["picard"]["ok"]
    assert report["stages"]["picard"]["error"] == "RangeExceeded"
    assert "lifespan" in report["stages"]
    assert not report["ok"]


def test_rd_exploratory_flag():
    config = ScenarioConfig(name="expl", dimension=1, grid_points=64,
                            horizon=0.25, ladder_depth=10,
                            samples_per_rung=4, rho=3.0, mu=-1.0,
                            p=1.5, q=2.0, r=1.2, amplitude=0.1)
    report = rd_wellposedness_scenario(config)
    assert report["exploratory"]
