"""
Boson shift operators and the shifted local basis.

Conventions used throughout the package:

    U(x) = exp(x (b^dag - b) / sqrt(2))

is the shift (displacement) operator of one site. A state stored with
shift x on a site represents the physical state U(x)|psi>, so physical
ladder operators read b + x/sqrt(2) in the stored basis, and the shifted
Hamiltonian is U^dag H U.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import logging
from typing import TYPE_CHECKING, NamedTuple, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.special import gammaln

from .validation import ValidationError, VALID_SHIFT_MODES, validate_choice

if TYPE_CHECKING:
    from .mps import MpsState

logger = logging.getLogger(__name__)

# norm lost to the truncated shift above which the run is flagged
NORM_LOSS_WARNING = 0.01


class LocalOperators(NamedTuple):
    """Truncated single-site boson operators."""

    b: NDArray[np.complex128]
    bdag: NDArray[np.complex128]
    n: NDArray[np.complex128]
    x: NDArray[np.complex128]


@dataclass(frozen=True)
class ShiftRegister:
    """
    Per-site displacements of the boson basis.

    Attributes:
        shifts: <x_k> for each boson site k = 1 ... L-1
        epsilon: Extra shift scale applied on top of the measured shifts
        mode: Gate construction style, 'substitute' or 'sandwich'
    """

    shifts: NDArray[np.float64]
    epsilon: float = 0.0
    mode: str = "substitute"

    def __post_init__(self) -> None:
        shifts = np.asarray(self.shifts, dtype=float)
        if not np.all(np.isfinite(shifts)):
            raise ValidationError("shifts must be finite")
        if self.epsilon < 0:
            raise ValidationError(f"epsilon must be >= 0, got {self.epsilon}")
        validate_choice(self.mode, "shift mode", VALID_SHIFT_MODES)
        object.__setattr__(self, "shifts", shifts)

    @classmethod
    def zeros(cls, num_bosons: int, mode: str = "substitute") -> "ShiftRegister":
        return cls(shifts=np.zeros(num_bosons), mode=mode)

    def scaled(self, epsilon: float) -> "ShiftRegister":
        """Register after an epsilon shift: displacements times (1 + epsilon)."""
        return replace(self, shifts=(1 + epsilon) * self.shifts, epsilon=epsilon)

    def site_shifts(self, with_spin: bool = True) -> NDArray[np.float64]:
        """Per chain site shifts, zero on the spin site."""
        if with_spin:
            return np.concatenate(([0.0], self.shifts))
        return self.shifts.copy()


def annihilation(d: int) -> NDArray[np.complex128]:
    """Truncated annihilation operator in the Fock basis |0> ... |d-1>."""
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)


def local_operators(d: int) -> LocalOperators:
    """Standard truncated ladder, number and position operators."""
    return shifted_local_operators(0.0, d)


def shifted_local_operators(x: float, d: int) -> LocalOperators:
    """
    Operators of the shifted basis, b' = b + x/sqrt(2).

    Products are formed from the truncated matrices, so n' = b'^dag b' is
    Hermitian and every gate built from it is exactly unitary.
    """
    b = annihilation(d) + (x / np.sqrt(2)) * np.eye(d)
    bdag = b.conj().T
    return LocalOperators(b=b, bdag=bdag, n=bdag @ b, x=(b + bdag) / np.sqrt(2))


def normal_order_coefficients(op: NDArray) -> NDArray[np.complex128]:
    """
    Coefficients c[p, q] of op = sum c[p, q] (b^dag)^p b^q on the truncated space.

    (b^dag)^p b^q has its first nonzero element at (p, q) and continues
    along the same diagonal, so the expansion is unique and is solved
    diagonal by diagonal from the top-left corner.
    """
    op = np.asarray(op, dtype=complex)
    d = op.shape[0]
    if op.shape != (d, d):
        raise ValidationError(f"normal ordering needs a square matrix, got {op.shape}")

    log_fact = gammaln(np.arange(d) + 1)
    coeffs = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            offset = i - j
            value = op[i, j]
            # earlier terms on this diagonal: (p, q) = (q + offset, q) with q < j
            for q in range(max(0, -offset), j):
                t = j - q
                value -= coeffs[q + offset, q] * np.exp(
                    0.5 * (log_fact[j] + log_fact[i]) - log_fact[t]
                )
            coeffs[i, j] = value * np.exp(-0.5 * (log_fact[i] + log_fact[j]))

    # round-off terms, judged at their leading matrix element
    scale = np.exp(0.5 * (log_fact[:, None] + log_fact[None, :]))
    coeffs[np.abs(coeffs) * scale < 1e-12 * max(1.0, float(np.max(np.abs(op))))] = 0.0
    return coeffs


def shifted_operator(op: NDArray, x: float) -> NDArray[np.complex128]:
    """
    U(x)^dag op U(x) for a boson operator given in the Fock basis.

    The operator is normal ordered and b -> b + x/sqrt(2) substituted, so
    the block is exact for every operator polynomial in b and b^dag (no
    truncated shift matrix enters).
    """
    op = np.asarray(op, dtype=complex)
    if x == 0:
        return op.copy()
    d = op.shape[0]
    coeffs = normal_order_coefficients(op)
    shifted = shifted_local_operators(x, d)

    result = np.zeros((d, d), dtype=complex)
    for p, q in zip(*np.nonzero(coeffs)):
        result += coeffs[p, q] * (
            np.linalg.matrix_power(shifted.bdag, p) @ np.linalg.matrix_power(shifted.b, q)
        )
    return result


def _raising_exponential(alpha: float, d: int) -> NDArray[np.float64]:
    # <n| exp(alpha b^dag) |m> = alpha^(n-m) sqrt(n!/m!) / (n-m)!  for n >= m
    n = np.arange(d)
    diff = n[:, None] - n[None, :]
    k = np.where(diff >= 0, diff, 0)
    log_mag = 0.5 * (gammaln(n + 1)[:, None] - gammaln(n + 1)[None, :]) - gammaln(k + 1)
    return np.where(diff >= 0, np.power(alpha, k) * np.exp(log_mag), 0.0)


def shift_matrix(x: float, d: int) -> NDArray[np.complex128]:
    """
    Matrix <n|U(x)|m> truncated to dimension d.

    Evaluated from the ordered product exp(x b^dag/sqrt2) exp(-x b/sqrt2)
    exp(-x^2/4). Both factors are triangular, so every element inside the
    block is exact; the block itself is not unitary once the displaced
    states leak past the cutoff (see unitarity_defect).
    """
    if d < 1:
        raise ValidationError(f"dimension must be >= 1, got {d}")
    alpha = x / np.sqrt(2)
    raising = _raising_exponential(alpha, d)
    lowering = _raising_exponential(-alpha, d).T
    return (raising @ lowering * np.exp(-x ** 2 / 4)).astype(complex)


def unitarity_defect(matrix: NDArray, levels: Optional[int] = None) -> float:
    """
    Frobenius norm of U^dag U - 1.

    Args:
        matrix: Square matrix
        levels: If given, only the block of the lowest ``levels`` states
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValidationError(f"unitarity_defect needs a square matrix, got {matrix.shape}")
    defect = matrix.conj().T @ matrix - np.eye(matrix.shape[0])
    if levels is not None:
        defect = defect[:levels, :levels]
    return float(np.linalg.norm(defect))


def sandwich_gate(
    gate: NDArray,
    x_left: float,
    x_right: float,
    d: int,
    left_dim: Optional[int] = None,
) -> NDArray[np.complex128]:
    """
    Transform a two-site gate into the shifted basis with truncated U.

    Returns (U_l (x) U_r)^dag . gate . (U_l (x) U_r), which matches the
    substitute construction exp(-i h(b + x/sqrt2) dt) up to the truncation
    of the shift matrices. ``left_dim`` is 2 for the spin-boson bond (the
    spin is never shifted).
    """
    left_dim = d if left_dim is None else left_dim
    dim = left_dim * d
    gate = np.asarray(gate)
    if gate.shape != (dim, dim):
        raise ValidationError(
            f"gate shape {gate.shape} does not match local dimensions ({left_dim}, {d})"
        )
    shift = np.kron(shift_matrix(x_left, left_dim), shift_matrix(x_right, d))
    return shift.conj().T @ gate @ shift


def apply_epsilon_shift(state: "MpsState", epsilon: float) -> "MpsState":
    """
    Push every boson site by U(epsilon x_k) and absorb the push into the frame.

    The truncated U(epsilon x_k) is applied to the stored tensors and the
    norm lost to truncation is measured; the push is then absorbed by moving
    the frame to (1 + epsilon) x_k, which leaves U((1+eps)x)^dag U(x) U(eps x)
    = U(eps x)^dag acting on the pushed state. The result is renormalized
    and the norm loss kept on ``state.shift_norm_loss``.
    """
    if epsilon < 0:
        raise ValidationError(f"epsilon must be >= 0, got {epsilon}")

    new_state = state.copy()
    if epsilon == 0:
        new_state.shift_norm_loss = 0.0
        return new_state

    norm_before = new_state.norm()
    pushes = {}
    for site in new_state.boson_sites():
        push = shift_matrix(epsilon * new_state.shifts[site], new_state.fock_dim)
        pushes[site] = push
        new_state.apply_site_matrix(site, new_state.embed_operator(push))

    norm_loss = 1.0 - new_state.norm() / norm_before
    for site, push in pushes.items():
        new_state.apply_site_matrix(site, new_state.embed_operator(push.conj().T))
        new_state.shifts[site] *= 1 + epsilon

    new_state.normalize()
    new_state.shift_norm_loss = float(norm_loss)

    if norm_loss > NORM_LOSS_WARNING:
        logger.warning(
            "epsilon shift lost %.3g of the norm (epsilon=%g, d=%d); "
            "the truncated shift is far from unitary",
            norm_loss, epsilon, new_state.fock_dim,
        )
    else:
        logger.info("epsilon shift applied (epsilon=%g, norm loss %.3g)", epsilon, norm_loss)

    return new_state
