"""
Nearest-neighbour Hamiltonians of the chain-mapped spin-boson model.

A LocalHamiltonian keeps on-site matrices and, for every bond, a list of
operator products A (x) B. From that one description the package derives
the two-site Trotter terms, the matrix product operator used by DMRG and
(for small chains) the dense matrix.

Boson operators are built with ``shifted_local_operators`` so a nonzero
shift x_k gives the shifted Hamiltonian U^dag H U by direct substitution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from .config import ModelParams
from .model import ChainCoefficients
from .mps import SIGMA_X, SIGMA_Z
from .shifts import shifted_local_operators
from .validation import ValidationError, validate_dense_dimension


Product = Tuple[NDArray[np.complex128], NDArray[np.complex128]]


@dataclass
class LocalHamiltonian:
    """
    H = sum_k onsite[k] + sum_k sum_j bonds[k][j][0] (x) bonds[k][j][1].

    Attributes:
        dims: Local dimension of every site
        onsite: Single-site terms
        bonds: Product terms acting on sites (k, k+1)
    """

    dims: List[int]
    onsite: List[NDArray[np.complex128]]
    bonds: List[List[Product]]

    def __post_init__(self) -> None:
        if len(self.onsite) != len(self.dims):
            raise ValidationError("one on-site term per site is required")
        if len(self.bonds) != len(self.dims) - 1:
            raise ValidationError("one bond entry per neighbouring pair is required")

    @property
    def num_sites(self) -> int:
        return len(self.dims)

    def bond_terms(self) -> List[NDArray[np.complex128]]:
        """
        Two-site matrices h_{k,k+1} whose sum is H.

        Each on-site term is split in half between its two bonds; sites at
        the chain ends give their full weight to their only bond.
        """
        terms = []
        last = self.num_sites - 2
        for k, products in enumerate(self.bonds):
            dl, dr = self.dims[k], self.dims[k + 1]
            term = np.zeros((dl * dr, dl * dr), dtype=complex)
            for left, right in products:
                term += np.kron(left, right)
            w_left = 1.0 if k == 0 else 0.5
            w_right = 1.0 if k == last else 0.5
            term += w_left * np.kron(self.onsite[k], np.eye(dr))
            term += w_right * np.kron(np.eye(dl), self.onsite[k + 1])
            terms.append(term)
        return terms

    def mpo(self) -> List[NDArray[np.complex128]]:
        """
        Matrix product operator with legs (wL, wR, n_out, n_in).

        Channel layout on the bond right of site k: 0 = nothing placed yet,
        1 ... r_k = left factor of product j placed, r_k + 1 = done.
        """
        ranks = [len(products) for products in self.bonds]
        tensors = []
        for k in range(self.num_sites):
            dim = self.dims[k]
            eye = np.eye(dim, dtype=complex)
            r_left = ranks[k - 1] if k > 0 else 0
            r_right = ranks[k] if k < self.num_sites - 1 else 0
            w = np.zeros((r_left + 2, r_right + 2, dim, dim), dtype=complex)
            w[0, 0] = eye
            w[-1, -1] = eye
            w[0, -1] = self.onsite[k]
            for j in range(r_right):
                w[0, 1 + j] = self.bonds[k][j][0]
            for j in range(r_left):
                w[1 + j, -1] = self.bonds[k - 1][j][1]
            tensors.append(w)

        tensors[0] = tensors[0][:1]
        tensors[-1] = tensors[-1][:, -1:]
        return tensors

    def dense(self) -> NDArray[np.complex128]:
        """Full matrix from the bond terms; small chains only."""
        total = int(np.prod(self.dims))
        validate_dense_dimension(total)
        if self.num_sites == 1:
            return self.onsite[0].copy()
        h = np.zeros((total, total), dtype=complex)
        for k, term in enumerate(self.bond_terms()):
            left = int(np.prod(self.dims[:k]))
            right = int(np.prod(self.dims[k + 2:]))
            h += np.kron(np.kron(np.eye(left), term), np.eye(right))
        return h


def _boson_operators(x: float, d: int, ancilla: bool):
    ops = shifted_local_operators(x, d)
    if not ancilla:
        return ops
    eye = np.eye(d)
    return type(ops)(*(np.kron(op, eye) for op in ops))


def _site_shifts(shifts: Optional[Sequence[float]], num_sites: int) -> NDArray[np.float64]:
    if shifts is None:
        return np.zeros(num_sites)
    shifts = np.asarray(shifts, dtype=float)
    if shifts.shape != (num_sites,):
        raise ValidationError(f"expected {num_sites} site shifts, got {shifts.shape}")
    return shifts


def _hopping_products(chain: ChainCoefficients, bosons: list) -> List[List[Product]]:
    bonds = []
    for k, t in enumerate(chain.hop):
        left, right = bosons[k], bosons[k + 1]
        bonds.append([
            (t * left.bdag, right.b),
            (t * left.b, right.bdag),
        ])
    return bonds


def spin_boson_hamiltonian(
    chain: ChainCoefficients,
    params: ModelParams,
    shifts: Optional[Sequence[float]] = None,
    ancilla: bool = False,
) -> LocalHamiltonian:
    """
    Chain Hamiltonian with the spin on site 0.

        H = -delta/2 sx - bias/2 sz + sz/2 eta1 (b1 + b1^dag)
            + sum_k w_k n_k + sum_k t_k (b_k^dag b_{k+1} + h.c.)

    Args:
        chain: Chain coefficients
        params: Model parameters (delta, bias, fock_dim)
        shifts: Per-site shifts including the spin (its entry is ignored)
        ancilla: Act on purified sites (operators o (x) 1)
    """
    d = params.fock_dim
    num_sites = chain.num_sites + 1
    x = _site_shifts(shifts, num_sites)
    bosons = [_boson_operators(x[k], d, ancilla) for k in range(1, num_sites)]

    spin_onsite = -0.5 * params.delta * SIGMA_X - 0.5 * params.bias * SIGMA_Z
    onsite = [spin_onsite] + [w * ops.n for w, ops in zip(chain.omega, bosons)]
    first = bosons[0]
    bonds = [[(0.5 * chain.eta1 * SIGMA_Z, first.b + first.bdag)]]
    bonds += _hopping_products(chain, bosons)

    dim = d * d if ancilla else d
    return LocalHamiltonian(dims=[2] + [dim] * chain.num_sites, onsite=onsite, bonds=bonds)


def bath_hamiltonian(
    chain: ChainCoefficients,
    d: int,
    shifts: Optional[Sequence[float]] = None,
    source: float = 0.0,
    ancilla: bool = False,
) -> LocalHamiltonian:
    """
    Bath chain with a static linear source on its first site.

        H = sum_k w_k n_k + sum_k t_k (b_k^dag b_{k+1} + h.c.)
            + source * eta1 (b1 + b1^dag)

    ``source = 1/2`` is the bath seen by a spin frozen in sigma_z = +1;
    ``source = mu`` is the polarized thermal bath, so mu = 1/2 equilibrates
    the bath to the same spin-up polarization.
    """
    x = _site_shifts(shifts, chain.num_sites)
    bosons = [_boson_operators(x[k], d, ancilla) for k in range(chain.num_sites)]

    onsite = [w * ops.n for w, ops in zip(chain.omega, bosons)]
    first = bosons[0]
    onsite[0] = onsite[0] + source * chain.eta1 * (first.b + first.bdag)
    bonds = _hopping_products(chain, bosons)

    dim = d * d if ancilla else d
    return LocalHamiltonian(dims=[dim] * chain.num_sites, onsite=onsite, bonds=bonds)
