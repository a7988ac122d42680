"""Thirty-site runs checked against the renormalized tunneling and the d trend."""

import numpy as np
import pytest

from sbm_shift.analysis import delta_r_zero_T, first_local_minimum, mode_occupations, resonance_peak
from sbm_shift.config import RunConfig
from sbm_shift.model import chain_coefficients
from sbm_shift.simulator import SpinBosonSimulator

pytestmark = pytest.mark.slow


def _run(tmp_path, name, **overrides):
    options = dict(
        chain_length=30, dt=0.1, snapshot_every=0, trunc_budget=1.0, bond_cap=32,
        output_dir=str(tmp_path / name),
    )
    options.update(overrides)
    return SpinBosonSimulator(RunConfig(**options)).evolve().record


def test_resonance_moves_onto_the_renormalized_tunneling(tmp_path):
    config = dict(s=1.0, alpha=0.1, delta=0.1, fock_dim=6, t_final=300.0, snapshot_every=1000)
    record = _run(tmp_path, "resonance", **config)
    target = delta_r_zero_T(0.1, 1.0, 0.1)

    chain = chain_coefficients(RunConfig(chain_length=30, **config).model_params())
    initial = mode_occupations(record.snapshots[0].correlation, chain).n_p
    peaks = [
        resonance_peak(mode_occupations(snap.correlation, chain, reference=initial))
        for snap in record.snapshots[1:]
    ]
    assert len(peaks) == 3
    distances = np.abs(np.array(peaks) - target)
    assert distances[-1] < 0.15 * target
    assert np.all(np.diff(distances) <= 0.01 * target)


def test_first_minimum_rises_with_the_local_dimension(tmp_path):
    config = dict(s=0.25, alpha=0.03, delta=0.1, t_final=100.0)
    minima = {
        d: first_local_minimum(_run(tmp_path, f"unshifted-{d}", fock_dim=d, shifted=False, **config))
        for d in (3, 4, 6, 8, 10)
    }
    t_s = [minima[d][0] for d in sorted(minima)]
    sigma_m = [minima[d][1] for d in sorted(minima)]
    assert np.all(np.diff(sigma_m) > 0)
    assert np.all(np.diff(t_s) <= 1e-9)

    _, shifted = first_local_minimum(_run(tmp_path, "shifted-10", fock_dim=10, **config))
    assert shifted > max(sigma_m)
