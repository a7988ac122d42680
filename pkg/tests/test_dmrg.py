import numpy as np
import pytest

from sbm_shift.config import ModelParams
from sbm_shift.dmrg import (
    FROZEN_SPIN_SOURCE,
    ground_state,
    measured_shifts,
    polarized_bath_state,
    prepare_dynamics_initial,
)
from sbm_shift.hamiltonian import bath_hamiltonian, spin_boson_hamiltonian
from sbm_shift.model import chain_coefficients
from sbm_shift.mps import SIGMA_Z, expect_local
from sbm_shift.oracles import dense_hamiltonian, displacement_oracle, frozen_spin_energy


class TestGroundState:
    def test_matches_exact_diagonalization(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=3, fock_dim=6)
        ham = bath_hamiltonian(chain_coefficients(params), 6, source=FROZEN_SPIN_SOURCE)
        exact = np.linalg.eigvalsh(ham.dense())[0]

        result = ground_state(ham, params, has_spin=False, max_bond=8)
        assert result.converged
        assert result.energy == pytest.approx(exact, abs=1e-8)
        assert result.state.norm() == pytest.approx(1.0, abs=1e-10)

    def test_sweeps_never_raise_the_energy(self):
        params = ModelParams(alpha=0.2, s=0.5, chain_length=4, fock_dim=4)
        ham = bath_hamiltonian(chain_coefficients(params), 4, source=FROZEN_SPIN_SOURCE)
        energies = ground_state(ham, params, has_spin=False, max_bond=4).sweep_energies
        # trimming the bonds in the last sweep may cost the dropped weight
        assert all(b <= a + 1e-10 for a, b in zip(energies, energies[1:]))

    def test_seed_is_reproducible(self):
        params = ModelParams(alpha=0.1, chain_length=3, fock_dim=4)
        ham = bath_hamiltonian(chain_coefficients(params), 4, source=FROZEN_SPIN_SOURCE)
        first = ground_state(ham, params, has_spin=False, seed=7)
        second = ground_state(ham, params, has_spin=False, seed=7)
        assert first.sweep_energies == second.sweep_energies

    def test_single_bath_site(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=2, fock_dim=20)
        chain = chain_coefficients(params)
        ham = bath_hamiltonian(chain, 20, source=FROZEN_SPIN_SOURCE)
        result = ground_state(ham, params, has_spin=False)
        x = displacement_oracle(chain)
        assert result.energy == pytest.approx(frozen_spin_energy(chain, x), abs=1e-10)

    def test_bonds_grow_from_a_product_seed(self):
        params = ModelParams(delta=0.5, alpha=0.5, s=1.0, chain_length=3, fock_dim=4)
        ham = spin_boson_hamiltonian(chain_coefficients(params), params)
        exact = np.linalg.eigvalsh(dense_hamiltonian(params))[0]

        result = ground_state(ham, params)
        assert result.converged
        assert result.energy == pytest.approx(exact, abs=1e-8)
        assert max(result.state.bond_dims) > 1

    def test_without_expansion_the_seed_stays_a_product(self):
        params = ModelParams(delta=0.5, alpha=0.5, s=1.0, chain_length=3, fock_dim=4)
        ham = spin_boson_hamiltonian(chain_coefficients(params), params)
        exact = np.linalg.eigvalsh(dense_hamiltonian(params))[0]

        result = ground_state(ham, params, noise=0.0)
        assert result.state.bond_dims == [1, 1]
        assert result.energy > exact + 1e-6

    def test_bond_cap_is_respected(self):
        params = ModelParams(delta=0.5, alpha=0.5, s=1.0, chain_length=4, fock_dim=4, bond_cap=2)
        ham = spin_boson_hamiltonian(chain_coefficients(params), params)
        result = ground_state(ham, params, max_sweeps=20)
        assert max(result.state.bond_dims) <= 2

    def test_optimized_basis_in_every_update(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=3, fock_dim=8, obb_dim=3)
        ham = bath_hamiltonian(chain_coefficients(params), 8, source=FROZEN_SPIN_SOURCE)
        result = ground_state(ham, params, has_spin=False)
        assert result.state.local_dims == [8, 8]
        assert [t.shape[1] for t in result.state.tensors] == [3, 3]
        exact = np.linalg.eigvalsh(ham.dense())[0]
        assert result.energy == pytest.approx(exact, abs=1e-6)


class TestPolarizedBath:
    def test_single_mode_displacement(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=2, fock_dim=20)
        state, register = polarized_bath_state(params, shift_tol=1e-9)
        assert register.shifts[0] == pytest.approx(-0.335410, abs=1e-6)
        oracle = displacement_oracle(chain_coefficients(params))
        np.testing.assert_allclose(measured_shifts(state), oracle, atol=1e-8)

    def test_shifted_frame_leaves_near_vacuum(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=4, fock_dim=6)
        state, register = polarized_bath_state(params, shift_tol=1e-7)
        oracle = displacement_oracle(chain_coefficients(params))
        np.testing.assert_allclose(register.shifts, oracle, atol=1e-5)
        np.testing.assert_allclose(state.shifts, register.shifts)
        # residual of the returned frame
        assert np.max(np.abs(measured_shifts(state) - state.shifts)) < 1e-7

    def test_heavy_damping_still_meets_the_tolerance(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=3, fock_dim=6)
        state, _ = polarized_bath_state(params, shift_tol=1e-6, damping=0.1, max_iterations=300)
        assert np.max(np.abs(measured_shifts(state) - state.shifts)) < 1e-6

    def test_unshifted(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=3, fock_dim=10)
        state, register = polarized_bath_state(params, shifted=False)
        np.testing.assert_array_equal(register.shifts, 0.0)
        oracle = displacement_oracle(chain_coefficients(params))
        np.testing.assert_allclose(measured_shifts(state), oracle, atol=1e-4)

    def test_no_coupling_gives_vacuum(self):
        params = ModelParams(alpha=0.0, chain_length=3, fock_dim=4)
        _, register = polarized_bath_state(params)
        np.testing.assert_allclose(register.shifts, 0.0, atol=1e-8)

    @pytest.mark.slow
    def test_long_ohmic_chain(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=30, fock_dim=6, bond_cap=16)
        _, register = polarized_bath_state(params)
        oracle = displacement_oracle(chain_coefficients(params))
        np.testing.assert_allclose(register.shifts, oracle, atol=1e-3)


class TestDynamicsInitial:
    def test_spin_up_and_scaled_frame(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=3, fock_dim=8, epsilon=0.1)
        initial = prepare_dynamics_initial(params)
        state = initial.state
        assert state.has_spin
        assert expect_local(state, SIGMA_Z, 0).real == pytest.approx(1.0, abs=1e-12)
        assert initial.register.epsilon == 0.1
        np.testing.assert_allclose(state.shifts[1:], initial.register.shifts)
        oracle = displacement_oracle(chain_coefficients(params))
        np.testing.assert_allclose(initial.register.shifts, 1.1 * oracle, atol=1e-4)
        assert len(initial.hamiltonian.dims) == 3
        assert initial.gates.dt == params.dt

    def test_unshifted_initial(self):
        params = ModelParams(alpha=0.1, s=1.0, chain_length=3, fock_dim=8)
        initial = prepare_dynamics_initial(params, shifted=False)
        np.testing.assert_array_equal(initial.state.shifts, 0.0)
        assert initial.register.epsilon == 0.0
