"""
Brute-force references for small chains.

Everything here is built directly from Kronecker products and dense
eigendecompositions, independently of the MPS machinery, and is capped
at MAX_DENSE_DIMENSION states.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import List, Optional

import numpy as np
from numpy.typing import NDArray
import scipy.linalg

from .config import ModelParams
from .model import ChainCoefficients, chain_coefficients
from .tebd import Snapshot, TrajectoryRecord
from .validation import NumericalError, validate_dense_dimension


@dataclass
class DenseThermal:
    """Observables of a dense thermal bath state."""

    occupations: NDArray[np.float64]
    positions: NDArray[np.float64]
    partition: float
    reduced: List[NDArray[np.complex128]]


def _ladder(d: int) -> NDArray[np.float64]:
    return np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1)


def _embed(op: NDArray, site: int, dims: List[int]) -> NDArray:
    left = int(np.prod(dims[:site]))
    right = int(np.prod(dims[site + 1:]))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def _bath_terms(chain: ChainCoefficients, d: int, dims: List[int], offset: int) -> NDArray:
    b = [_embed(_ladder(d), offset + k, dims) for k in range(chain.num_sites)]
    total = int(np.prod(dims))
    h = np.zeros((total, total))
    for k, w in enumerate(chain.omega):
        h += w * b[k].T @ b[k]
    for k, t in enumerate(chain.hop):
        hop = b[k].T @ b[k + 1]
        h += t * (hop + hop.T)
    return h


def dense_hamiltonian(params: ModelParams, chain: Optional[ChainCoefficients] = None) -> NDArray:
    """Full truncated chain Hamiltonian, spin first."""
    chain = chain_coefficients(params) if chain is None else chain
    d = params.fock_dim
    dims = [2] + [d] * chain.num_sites
    validate_dense_dimension(int(np.prod(dims)))

    sx = _embed(np.array([[0.0, 1.0], [1.0, 0.0]]), 0, dims)
    sz = _embed(np.diag([1.0, -1.0]), 0, dims)
    b1 = _embed(_ladder(d), 1, dims)
    h = -0.5 * params.delta * sx - 0.5 * params.bias * sz
    h = h + 0.5 * chain.eta1 * sz @ (b1 + b1.T)
    return h + _bath_terms(chain, d, dims, offset=1)


def dense_evolve(params: ModelParams, t_final: float, dt_obs: float) -> TrajectoryRecord:
    """
    Exact evolution of spin up times the bath vacuum.

    Snapshots hold the chain occupations <n_k(t)> on the diagonal of their
    correlation matrix.
    """
    chain = chain_coefficients(params)
    d = params.fock_dim
    dims = [2] + [d] * chain.num_sites
    h = dense_hamiltonian(params, chain)
    evals, evecs = scipy.linalg.eigh(h)

    psi0 = np.zeros(h.shape[0], dtype=complex)
    psi0[0] = 1.0
    coeffs = evecs.conj().T @ psi0

    sz = _embed(np.diag([1.0, -1.0]), 0, dims)
    numbers = [_embed(np.diag(np.arange(d, dtype=float)), 1 + k, dims) for k in range(chain.num_sites)]

    record = TrajectoryRecord()
    n_obs = int(round(t_final / dt_obs))
    for step in range(n_obs + 1):
        t = step * dt_obs
        psi = evecs @ (np.exp(-1j * evals * t) * coeffs)
        sigma = np.vdot(psi, sz @ psi).real
        energy = np.vdot(psi, h @ psi).real
        record.append(t, sigma, np.vdot(psi, psi).real, energy, 0.0)
        occ = np.array([np.vdot(psi, n @ psi).real for n in numbers])
        record.snapshots.append(Snapshot(t=t, correlation=np.diag(occ).astype(complex), entropies=np.array([])))
    return record


def dense_thermal(params: ModelParams, beta: Optional[float] = None, mu: Optional[float] = None) -> DenseThermal:
    """
    exp(-beta [H_B + mu eta1 (b1 + b1^dag)]) / Z of the bath alone.

    Returns per-site <n_k>, <x_k>, Z and reduced density matrices.
    """
    beta = params.beta if beta is None else beta
    mu = params.mu if mu is None else mu
    chain = chain_coefficients(params)
    d = params.fock_dim
    dims = [d] * chain.num_sites
    validate_dense_dimension(int(np.prod(dims)))

    b1 = _embed(_ladder(d), 0, dims)
    h = _bath_terms(chain, d, dims, offset=0) + mu * chain.eta1 * (b1 + b1.T)
    evals, evecs = scipy.linalg.eigh(h)

    weights = np.exp(-beta * (evals - evals[0]))
    partition = float(np.sum(weights) * math.exp(-beta * evals[0]))
    rho = (evecs * (weights / weights.sum())) @ evecs.conj().T

    occupations, positions, reduced = [], [], []
    number = np.diag(np.arange(d, dtype=float))
    position = (_ladder(d) + _ladder(d).T) / np.sqrt(2)
    tensor = rho.reshape(dims + dims)
    n = len(dims)
    for k in range(n):
        local = np.einsum(tensor, list(range(n)) + [n + i if i == k else i for i in range(n)], [k, n + k])
        reduced.append(local)
        occupations.append(np.trace(local @ number).real)
        positions.append(np.trace(local @ position).real)

    return DenseThermal(
        occupations=np.array(occupations),
        positions=np.array(positions),
        partition=partition,
        reduced=reduced,
    )


def displacement_oracle(chain: ChainCoefficients) -> NDArray[np.float64]:
    """
    Frozen-spin displacements: the solution of T x = -(eta1 / sqrt 2) e_1.

    Raises:
        NumericalError: If T is singular
    """
    t_matrix = chain.single_particle_matrix()
    rhs = np.zeros(chain.num_sites)
    rhs[0] = -chain.eta1 / np.sqrt(2)
    try:
        return scipy.linalg.solve(t_matrix, rhs, assume_a="sym")
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"tridiagonal chain matrix is singular: {e}") from e


def frozen_spin_energy(chain: ChainCoefficients, x: NDArray) -> float:
    """E(x) = 1/2 sum w_k x_k^2 + sum t_k x_k x_{k+1} + eta1 / sqrt 2 x_1."""
    x = np.asarray(x, dtype=float)
    return float(
        0.5 * np.sum(chain.omega * x ** 2)
        + np.sum(chain.hop * x[:-1] * x[1:])
        + chain.eta1 / np.sqrt(2) * x[0]
    )


def rabi_oscillation(delta: float, times: NDArray) -> NDArray[np.float64]:
    """<sigma_z(t)> of the free spin started up."""
    return np.cos(delta * np.asarray(times, dtype=float))


def bose_occupation(omega: float, beta: float, d: int) -> float:
    """Thermal occupation of one mode truncated to d levels."""
    n = np.arange(d)
    weights = np.exp(-beta * omega * n)
    return float(np.sum(n * weights) / np.sum(weights))
