"""Shared fixtures for the sbm_shift test suite."""

import numpy as np
import pytest

from sbm_shift.config import ModelParams, RunConfig
from sbm_shift.model import chain_coefficients
from sbm_shift.tebd import TrajectoryRecord


@pytest.fixture
def small_params() -> ModelParams:
    """Four-site chain small enough for dense references."""
    return ModelParams(
        delta=0.1, alpha=0.03, s=0.25, chain_length=4, fock_dim=4, dt=0.05, bond_cap=64,
    )


@pytest.fixture
def ohmic_params() -> ModelParams:
    return ModelParams(delta=0.1, alpha=0.1, s=1.0, chain_length=3, fock_dim=6)


@pytest.fixture
def small_chain(small_params):
    return chain_coefficients(small_params)


def _make_record(times, values) -> TrajectoryRecord:
    record = TrajectoryRecord()
    for t, v in zip(times, values):
        record.append(t, v, 1.0, 0.0, 0.0)
    return record


@pytest.fixture
def cosine_record() -> TrajectoryRecord:
    """<sigma_z> = cos(0.1 t) sampled every 0.1 up to t = 400."""
    times = np.round(np.arange(0, 4001) * 0.1, 10)
    return _make_record(times, np.cos(0.1 * times))


@pytest.fixture
def run_config(tmp_path) -> RunConfig:
    """Tiny real-time run: two-site chain, no bath coupling."""
    return RunConfig(
        alpha=0.0,
        delta=0.1,
        chain_length=2,
        fock_dim=2,
        dt=0.1,
        t_final=10.0,
        output_dir=str(tmp_path / "run"),
        snapshot_every=0,
    )


@pytest.fixture
def record_from():
    """Build a TrajectoryRecord from times and sigma_z values."""
    return _make_record
