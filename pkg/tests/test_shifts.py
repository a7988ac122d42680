import logging

import numpy as np
import pytest
import scipy.linalg

from sbm_shift.config import ModelParams
from sbm_shift.mps import expect_local, init_product_state
from sbm_shift.shifts import (
    ShiftRegister,
    annihilation,
    apply_epsilon_shift,
    local_operators,
    normal_order_coefficients,
    sandwich_gate,
    shift_matrix,
    shifted_local_operators,
    shifted_operator,
    unitarity_defect,
)
from sbm_shift.validation import ValidationError


class TestShiftMatrix:
    @pytest.mark.parametrize("d", [1, 4, 10])
    def test_zero_shift_is_identity(self, d):
        assert np.array_equal(shift_matrix(0.0, d), np.eye(d))

    @pytest.mark.parametrize("d", [2, 8, 20])
    def test_vacuum_element(self, d):
        assert shift_matrix(1.0, d)[0, 0] == pytest.approx(np.exp(-0.25), abs=1e-12)

    def test_matches_matrix_exponential_in_low_block(self):
        d, x = 40, 0.7
        b = annihilation(d)
        exact = scipy.linalg.expm(x * (b.conj().T - b) / np.sqrt(2))
        np.testing.assert_allclose(shift_matrix(x, d)[:10, :10], exact[:10, :10], atol=1e-10)

    def test_small_shift_is_unitary_on_low_levels(self):
        assert unitarity_defect(shift_matrix(0.2, 10), levels=5) < 1e-6

    def test_defect_grows_with_shift(self):
        defects = [unitarity_defect(shift_matrix(x, 10)) for x in (0.1, 0.3, 0.6, 1.0, 1.5)]
        assert all(a < b for a, b in zip(defects, defects[1:]))

    def test_large_shift_is_far_from_unitary(self):
        assert unitarity_defect(shift_matrix(4.0, 5)) > 0.5

    def test_inverse(self):
        product = shift_matrix(0.5, 30) @ shift_matrix(-0.5, 30)
        np.testing.assert_allclose(product[:10, :10], np.eye(10), atol=1e-10)

    def test_invalid_dimension(self):
        with pytest.raises(ValidationError):
            shift_matrix(0.1, 0)


def test_unitarity_defect_identity():
    assert unitarity_defect(np.eye(6)) == 0.0
    with pytest.raises(ValidationError, match="square"):
        unitarity_defect(np.ones((2, 3)))


class TestShiftedOperators:
    def test_zero_shift(self):
        ops = local_operators(5)
        np.testing.assert_array_equal(ops.b, annihilation(5))
        np.testing.assert_allclose(ops.n, np.diag(np.arange(5.0)))

    @pytest.mark.parametrize("x", [-1.3, 0.4, 2.0])
    def test_vacuum_occupation(self, x):
        ops = shifted_local_operators(x, 8)
        assert ops.n[0, 0].real == pytest.approx(x ** 2 / 2, abs=1e-12)
        np.testing.assert_array_equal(ops.bdag, ops.b.conj().T)
        np.testing.assert_allclose(ops.n, ops.n.conj().T)

    def test_number_operator_is_normal_ordered(self):
        coeffs = normal_order_coefficients(local_operators(5).n)
        expected = np.zeros((5, 5))
        expected[1, 1] = 1.0
        np.testing.assert_allclose(coeffs, expected, atol=1e-12)

    def test_position_moves_by_the_shift(self):
        d, x0 = 6, 3.0
        x_op = local_operators(d).x
        np.testing.assert_allclose(shifted_operator(x_op, x0), x_op + x0 * np.eye(d), atol=1e-10)

    def test_number_operator_matches_substituted_ladder(self):
        shifted = shifted_local_operators(-2.5, 4)
        np.testing.assert_allclose(
            shifted_operator(local_operators(4).n, -2.5), shifted.n, atol=1e-10,
        )

    def test_shift_back_recovers_operator(self):
        rng = np.random.default_rng(3)
        op = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        there = shifted_operator(op, 0.8)
        np.testing.assert_allclose(shifted_operator(there, -0.8), op, atol=1e-9)


class TestSandwichGate:
    def test_zero_shifts_leave_gate_unchanged(self):
        gate = scipy.linalg.expm(-1j * 0.1 * np.kron(np.diag(np.arange(4.0)), np.eye(4)))
        np.testing.assert_allclose(sandwich_gate(gate, 0.0, 0.0, 4), gate, atol=1e-14)

    def test_identity_gate(self):
        d = 10
        result = sandwich_gate(np.eye(d * d), 0.2, 0.1, d)
        left = unitarity_defect(shift_matrix(0.2, d))
        right = unitarity_defect(shift_matrix(0.1, d))
        # Frobenius norm of (A (x) B - 1) for A = 1 + dA, B = 1 + dB
        bound = left * (np.sqrt(d) + right) + np.sqrt(d) * right
        assert np.linalg.norm(result - np.eye(d * d)) <= bound + 1e-12

    def test_matches_substitute_construction(self):
        d, dt, x_l, x_r = 20, 0.1, 0.5, 0.3
        n = local_operators(d).n
        plain = scipy.linalg.expm(-1j * dt * np.kron(n, np.eye(d)))
        shifted_n = shifted_local_operators(x_l, d).n
        substitute = scipy.linalg.expm(-1j * dt * np.kron(shifted_n, np.eye(d)))
        sandwich = sandwich_gate(plain, x_l, x_r, d)
        low = [i * d + j for i in range(4) for j in range(4)]
        np.testing.assert_allclose(sandwich[np.ix_(low, low)], substitute[np.ix_(low, low)], atol=1e-6)

    def test_spin_bond(self):
        d = 6
        gate = np.eye(2 * d)
        assert sandwich_gate(gate, 0.0, 0.0, d, left_dim=2).shape == (12, 12)
        with pytest.raises(ValidationError, match="does not match"):
            sandwich_gate(gate, 0.0, 0.0, d)


class TestShiftRegister:
    def test_scaled(self):
        register = ShiftRegister(shifts=np.array([0.5, -1.0]))
        scaled = register.scaled(0.1)
        np.testing.assert_allclose(scaled.shifts, [0.55, -1.1])
        assert scaled.epsilon == 0.1
        np.testing.assert_allclose(scaled.site_shifts(), [0.0, 0.55, -1.1])

    def test_invalid(self):
        with pytest.raises(ValidationError):
            ShiftRegister(shifts=np.array([np.nan]))
        with pytest.raises(ValidationError):
            ShiftRegister(shifts=np.zeros(2), mode="other")


def _coherent_state(x: float, d: int):
    state = init_product_state(ModelParams(chain_length=2, fock_dim=d, alpha=0.0))
    state.shifts[1] = x
    return state


class TestEpsilonShift:
    def test_zero_epsilon(self):
        state = _coherent_state(1.0, 10)
        shifted = apply_epsilon_shift(state, 0.0)
        np.testing.assert_array_equal(shifted.shifts, state.shifts)
        for a, b in zip(shifted.tensors, state.tensors):
            np.testing.assert_array_equal(a, b)

    def test_occupation_grows(self):
        d, x = 30, 2.0
        n_op = local_operators(d).n
        state = _coherent_state(x, d)
        before = expect_local(state, n_op, 1).real
        after_state = apply_epsilon_shift(state, 0.1)
        after = expect_local(after_state, n_op, 1).real
        assert after / before == pytest.approx(1.21, rel=1e-2)
        assert after_state.shifts[1] == pytest.approx(2.2)
        assert after_state.norm() == pytest.approx(1.0, abs=1e-12)

    def test_large_epsilon_is_flagged(self, caplog):
        state = _coherent_state(3.0, 10)
        with caplog.at_level(logging.WARNING, logger="sbm_shift.shifts"):
            shifted = apply_epsilon_shift(state, 1.5)
        assert shifted.shift_norm_loss > 0.01
        assert "lost" in caplog.text

    def test_negative_epsilon(self):
        with pytest.raises(ValidationError):
            apply_epsilon_shift(_coherent_state(1.0, 4), -0.1)
