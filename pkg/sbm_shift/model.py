"""
Spin-boson model definition and the star <-> chain bath mappings.

The bath has a power-law spectral density with a hard cutoff,

    J(w) = 2 pi alpha w_c^(1-s) w^s   for 0 <= w < w_c,   0 otherwise,

which maps exactly onto a semi-infinite nearest-neighbour chain with
closed-form on-site energies and hoppings. Only the first L-1 chain sites
are kept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .config import ModelParams
from .validation import ValidationError, validate_int_range


@dataclass(frozen=True)
class ChainCoefficients:
    """
    Coefficients of the chain-mapped bath.

    Attributes:
        eta1: Coupling of the spin to the first chain site
        omega: On-site energies w_1 ... w_{L-1}
        hop: Hoppings t_1 ... t_{L-2}
    """

    eta1: float
    omega: NDArray[np.float64]
    hop: NDArray[np.float64]

    @property
    def num_sites(self) -> int:
        return len(self.omega)

    def single_particle_matrix(self) -> NDArray[np.float64]:
        """Tridiagonal matrix T with diag(w_k) and off-diagonal t_k."""
        return np.diag(self.omega) + np.diag(self.hop, k=1) + np.diag(self.hop, k=-1)


@dataclass(frozen=True)
class StarBath:
    """
    Normal modes of the truncated chain.

    Attributes:
        frequencies: Mode frequencies w_p, ascending
        transform: Orthogonal matrix O with b_p = sum_k O[p, k] b_k
    """

    frequencies: NDArray[np.float64]
    transform: NDArray[np.float64]


def spectral_density(omega: float | NDArray, params: ModelParams) -> float | NDArray:
    """
    Evaluate J(w) on the half-open support [0, w_c).

    Raises:
        ValidationError: If any frequency is negative
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ValidationError(f"spectral density needs omega >= 0, got {omega}")

    value = np.where(
        w < params.omega_c,
        2 * np.pi * params.alpha * params.omega_c ** (1 - params.s) * w ** params.s,
        0.0,
    )
    if np.ndim(omega) == 0:
        return float(value)
    return value


def chain_coefficients(params: ModelParams) -> ChainCoefficients:
    """
    Closed-form chain coefficients for the hard-cutoff power-law bath.

    Raises:
        ValidationError: If s <= 0 or the chain is shorter than two sites
    """
    s = params.s
    wc = params.omega_c
    if s <= 0:
        raise ValidationError(f"spectral exponent must be positive, got {s}")
    validate_int_range(params.chain_length, "chain_length", 2)

    eta1 = np.sqrt(2 * params.alpha * wc ** 2 / (1 + s))

    k = np.arange(1, params.chain_length, dtype=float)
    omega = wc / 2 * (1 + s ** 2 / ((s + 2 * k - 2) * (s + 2 * k)))

    k = np.arange(1, params.chain_length - 1, dtype=float)
    hop = (
        wc * k * (s + k) / ((s + 2 * k) * (1 + s + 2 * k))
        * np.sqrt((s + 2 * k + 1) / (s + 2 * k - 1))
    )

    return ChainCoefficients(eta1=float(eta1), omega=omega, hop=hop)


def chain_to_star(chain: ChainCoefficients) -> StarBath:
    """
    Invert the chain mapping by diagonalizing the tridiagonal matrix T.

    Rows of the returned transform are eigenvectors of T, ordered by
    ascending frequency, each with its first nonzero component positive.
    """
    freqs, vecs = np.linalg.eigh(chain.single_particle_matrix())
    transform = vecs.T.copy()

    for row in transform:
        nonzero = np.flatnonzero(np.abs(row) > 1e-14)
        if nonzero.size and row[nonzero[0]] < 0:
            row *= -1

    return StarBath(frequencies=freqs, transform=transform)
