# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Fixtures for geodesic-gossip experiment tests."""

import typing
from pathlib import Path

import numpy as np
from pytest import Config, fixture

import harness
from experiment_state import ExperimentConfig

CONSENSUS_STEPS = ("0.6", "0.8", "1.0")


@fixture(scope="module", name="experiments_dir")
def experiments_dir_fixture() -> Path:
    """Provides the bundled experiment configurations."""
    return Path("./experiments")


@fixture(scope="module", name="horizon")
def horizon_fixture(pytestconfig: Config) -> int:
    """Provides the number of rounds of the experiment runs."""
    return pytestconfig.getoption("--horizon")


@fixture(scope="module", name="repetitions")
def repetitions_fixture(pytestconfig: Config) -> int:
    """Provides the number of seeds averaged per curve."""
    return pytestconfig.getoption("--repetitions")


@fixture(scope="module", name="sphere_full")
def sphere_full_fixture(experiments_dir: Path, horizon: int) -> ExperimentConfig:
    """Provides the full-information sphere configuration at the requested horizon."""
    return ExperimentConfig.from_file(experiments_dir / "sphere_full.conf", {"horizon": horizon})


@fixture(scope="module", name="sphere_full_record")
def sphere_full_record_fixture(sphere_full: ExperimentConfig) -> harness.RunRecord:
    """Runs the first repetition of the full-information sphere experiment."""
    (seed,) = np.random.SeedSequence(sphere_full.seed).spawn(1)
    return harness.simulate(sphere_full, sphere_full.check_assumptions(), seed)


@fixture(scope="module", name="sphere_sweep")
def sphere_sweep_fixture(
    experiments_dir: Path, horizon: int, repetitions: int
) -> typing.Dict[typing.Tuple[str, float], harness.RegretTrace]:
    """Runs both sphere algorithms for every consensus step, averaged over the seeds.

    Returns:
        the traces keyed by algorithm and consensus step.
    """
    traces = {}
    for name in ("sphere_full", "sphere_bandit"):
        for step in CONSENSUS_STEPS:
            cfg = ExperimentConfig.from_file(
                experiments_dir / f"{name}.conf",
                {"horizon": horizon, "repetitions": repetitions, "consensus_step": step},
            )
            traces[(cfg.algorithm, cfg.consensus_step)] = harness.run_experiment(cfg)
    return traces
