import math

import numpy as np
import pytest

from sbm_shift.config import ModelParams
from sbm_shift.model import chain_coefficients
from sbm_shift.oracles import (
    bose_occupation,
    dense_evolve,
    dense_hamiltonian,
    dense_thermal,
    displacement_oracle,
    frozen_spin_energy,
    rabi_oscillation,
)
from sbm_shift.validation import ValidationError


class TestBoseOccupation:
    def test_truncated_mode(self):
        assert bose_occupation(2 / 3, 2.0, 20) == pytest.approx(0.35797, abs=1e-4)

    def test_converges_to_bose_einstein(self):
        expected = 1 / math.expm1(4 / 3)
        assert bose_occupation(2 / 3, 2.0, 200) == pytest.approx(expected, abs=1e-12)

    def test_single_level(self):
        assert bose_occupation(0.5, 1.0, 1) == 0.0


class TestDisplacement:
    def test_single_mode(self):
        chain = chain_coefficients(ModelParams(alpha=0.1, s=1.0, chain_length=2))
        (x,) = displacement_oracle(chain)
        assert x == pytest.approx(-0.335410, abs=1e-6)
        assert x == pytest.approx(-chain.eta1 / (math.sqrt(2) * chain.omega[0]), abs=1e-14)

    def test_minimizes_frozen_spin_energy(self):
        chain = chain_coefficients(ModelParams(alpha=0.1, s=0.5, chain_length=30))
        x = displacement_oracle(chain)
        best = frozen_spin_energy(chain, x)
        rng = np.random.default_rng(0)
        for _ in range(5):
            assert frozen_spin_energy(chain, x + 1e-3 * rng.standard_normal(len(x))) > best

    def test_energy_at_minimum(self):
        chain = chain_coefficients(ModelParams(alpha=0.1, s=1.0, chain_length=2))
        x = displacement_oracle(chain)
        assert frozen_spin_energy(chain, x) == pytest.approx(
            -chain.eta1 ** 2 / (4 * chain.omega[0]), abs=1e-14
        )


class TestDenseEvolution:
    def test_free_spin(self):
        params = ModelParams(delta=0.2, alpha=0.0, chain_length=2, fock_dim=3)
        record = dense_evolve(params, 10.0, 0.5)
        times = np.asarray(record.times)
        assert len(times) == 21
        np.testing.assert_allclose(record.sigma_z, rabi_oscillation(0.2, times), atol=1e-12)
        np.testing.assert_allclose(record.norm, 1.0, atol=1e-12)
        assert all(np.allclose(s.occupations, 0.0) for s in record.snapshots)

    def test_energy_is_conserved(self):
        params = ModelParams(delta=0.1, alpha=0.1, chain_length=3, fock_dim=4)
        record = dense_evolve(params, 5.0, 0.5)
        np.testing.assert_allclose(record.energy, record.energy[0], atol=1e-12)

    def test_dense_cap(self):
        with pytest.raises(ValidationError, match="cap"):
            dense_hamiltonian(ModelParams(chain_length=6, fock_dim=6))


class TestDenseThermal:
    def test_single_mode(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=2, fock_dim=10, beta=2.0, mu=0.0)
        result = dense_thermal(params)
        assert result.occupations[0] == pytest.approx(bose_occupation(2 / 3, 2.0, 10), abs=1e-12)
        assert result.positions[0] == pytest.approx(0.0, abs=1e-12)
        weights = np.exp(-2.0 * (2 / 3) * np.arange(10))
        assert result.partition == pytest.approx(weights.sum(), rel=1e-12)

    def test_reduced_states_are_normalized(self):
        params = ModelParams(alpha=0.1, chain_length=3, fock_dim=4, beta=1.0)
        result = dense_thermal(params)
        for rho in result.reduced:
            assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
        # mu > 0 pulls the first site the way a spin frozen up does
        assert result.positions[0] < 0
