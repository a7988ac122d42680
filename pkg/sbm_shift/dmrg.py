"""
Single-site DMRG and the polarized-bath initial state.

The ground state of the bath coupled to a spin frozen in sigma_z = +1 is
found by alternating DMRG with a re-shift of every boson site to its
measured displacement, until the displacements stop moving.

Sweeps start from a bond-1 product state. Each local update enlarges the
bond towards the next site by the action of the Hamiltonian on the
updated tensor, scaled down to the expansion noise, so bonds grow up to
the cap where the state needs them. The local space of every boson site
is compressed to its optimized basis in the same update.
"""

from __future__ import annotations

import logging
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, eigsh

from .config import ModelParams
from .hamiltonian import LocalHamiltonian, bath_hamiltonian
from .model import chain_coefficients
from .mps import (
    MpsState,
    attach_spin,
    canonicalize,
    expect_local,
    obb_update,
    optimal_basis,
    reduced_density_matrix,
    svd_truncate,
)
from .shifts import ShiftRegister, apply_epsilon_shift, local_operators
from .tebd import GateSet, spin_boson_gates
from .validation import NumericalError, ValidationError, validate_int_range, validate_nonnegative

logger = logging.getLogger(__name__)

# local problems up to this size are solved densely
DENSE_LIMIT = 256
# polarization of the frozen spin seen by the bath
FROZEN_SPIN_SOURCE = 0.5
# norm of the expansion block relative to the updated tensor
EXPANSION_NOISE = 1e-8
# expanded directions below this relative singular value are dropped
EXPANSION_FLOOR = 1e-12


class GroundStateResult(NamedTuple):
    state: MpsState
    energy: float
    sweep_energies: List[float]
    converged: bool


class InitialCondition(NamedTuple):
    """Everything a real-time run starts from."""

    state: MpsState
    register: ShiftRegister
    gates: GateSet
    hamiltonian: LocalHamiltonian


def _update_left(env: NDArray, tensor: NDArray, w: NDArray) -> NDArray:
    return np.einsum("awb,anc,wxnm,bmd->cxd", env, tensor.conj(), w, tensor, optimize=True)


def _update_right(env: NDArray, tensor: NDArray, w: NDArray) -> NDArray:
    return np.einsum("cxd,anc,wxnm,bmd->awb", env, tensor.conj(), w, tensor, optimize=True)


def _solve_local(left: NDArray, w: NDArray, right: NDArray, guess: NDArray) -> Tuple[float, NDArray]:
    shape = guess.shape
    size = guess.size

    if size <= DENSE_LIMIT:
        heff = np.einsum("awb,wxnm,cxd->ancbmd", left, w, right, optimize=True).reshape(size, size)
        heff = 0.5 * (heff + heff.conj().T)
        evals, evecs = scipy.linalg.eigh(heff)
        return float(evals[0]), evecs[:, 0].reshape(shape)

    def matvec(vec: NDArray) -> NDArray:
        v = vec.reshape(shape)
        return np.einsum("awb,wxnm,bmd,cxd->anc", left, w, v, right, optimize=True).ravel()

    operator = LinearOperator((size, size), matvec=matvec, dtype=complex)
    v0 = guess.ravel()
    if not np.any(v0):
        v0 = None
    evals, evecs = eigsh(operator, k=1, which="SA", v0=v0, tol=0)
    return float(evals[0]), evecs[:, 0].reshape(shape)


def _product_state(
    hamiltonian: LocalHamiltonian,
    fock_dim: int,
    has_spin: bool,
    shifts: NDArray,
    rng: np.random.Generator,
) -> MpsState:
    tensors = [
        rng.standard_normal((1, dim, 1)).astype(complex) for dim in hamiltonian.dims
    ]
    state = MpsState(
        tensors=tensors,
        obb=[np.eye(dim, dtype=complex) for dim in hamiltonian.dims],
        shifts=shifts.copy(),
        fock_dim=fock_dim,
        has_spin=has_spin,
        center=None,
    )
    canonicalize(state, 0)
    state.normalize()
    return state


def _fock_form(state: MpsState, shifts: NDArray) -> MpsState:
    """Copy of a previous solution with every site back in its full local basis."""
    fock = MpsState(
        tensors=[state.physical_tensor(site) for site in range(state.num_sites)],
        obb=[np.eye(v.shape[1], dtype=complex) for v in state.obb],
        shifts=shifts.copy(),
        fock_dim=state.fock_dim,
        has_spin=state.has_spin,
        center=None,
    )
    canonicalize(fock, 0)
    fock.normalize()
    return fock


def _compress_local(tensor: NDArray, d_opt: int) -> NDArray:
    """Project a site tensor onto its d_opt dominant local states."""
    if d_opt >= tensor.shape[1]:
        return tensor
    basis = optimal_basis(reduced_density_matrix(tensor), d_opt).basis
    projected = np.einsum("anb,jn,jm->amb", tensor, basis.conj(), basis)
    return projected / np.linalg.norm(projected)


def _expansion_right(left: NDArray, w: NDArray, tensor: NDArray, noise: float) -> NDArray:
    dl, p, _ = tensor.shape
    block = np.einsum("awb,wxnm,bmd->anxd", left, w, tensor, optimize=True).reshape(dl, p, -1)
    scale = np.linalg.norm(block)
    return block * (noise * np.linalg.norm(tensor) / scale) if scale > 0 else block


def _expansion_left(right: NDArray, w: NDArray, tensor: NDArray, noise: float) -> NDArray:
    _, p, dr = tensor.shape
    block = np.einsum("wxnm,amd,cxd->wanc", w, tensor, right, optimize=True).reshape(-1, p, dr)
    scale = np.linalg.norm(block)
    return block * (noise * np.linalg.norm(tensor) / scale) if scale > 0 else block


def _split(theta: NDArray, max_bond: int, weight_tol: float, expanded: bool) -> Tuple[NDArray, NDArray, NDArray]:
    if not expanded:
        result = svd_truncate(theta, max_bond, weight_tol)
        return result.left, result.singular_values, result.right
    u, sv, vh = scipy.linalg.svd(theta, full_matrices=False, lapack_driver="gesdd")
    keep = max(1, min(max_bond, int(np.count_nonzero(sv > EXPANSION_FLOOR * sv[0]))))
    return u[:, :keep], sv[:keep], vh[:keep, :]


def _step_right(
    state: MpsState, site: int, tensor: NDArray, left: NDArray, w: NDArray,
    max_bond: int, weight_tol: float, noise: float,
) -> None:
    nxt = state.tensors[site + 1]
    expanded = noise > 0 and tensor.shape[2] < max_bond
    if expanded:
        block = _expansion_right(left, w, tensor, noise)
        tensor = np.concatenate([tensor, block], axis=2)
        padding = np.zeros((block.shape[2],) + nxt.shape[1:], dtype=complex)
        nxt = np.concatenate([nxt, padding], axis=0)

    dl, p, dr = tensor.shape
    u, sv, vh = _split(tensor.reshape(dl * p, dr), max_bond, weight_tol, expanded)
    state.tensors[site] = u.reshape(dl, p, -1)
    state.tensors[site + 1] = np.einsum("ab,bjc->ajc", sv[:, None] * vh, nxt)
    state.center = site + 1


def _step_left(
    state: MpsState, site: int, tensor: NDArray, right: NDArray, w: NDArray,
    max_bond: int, weight_tol: float, noise: float,
) -> None:
    prev = state.tensors[site - 1]
    expanded = noise > 0 and tensor.shape[0] < max_bond
    if expanded:
        block = _expansion_left(right, w, tensor, noise)
        tensor = np.concatenate([tensor, block], axis=0)
        padding = np.zeros(prev.shape[:2] + (block.shape[0],), dtype=complex)
        prev = np.concatenate([prev, padding], axis=2)

    dl, p, dr = tensor.shape
    u, sv, vh = _split(tensor.reshape(dl, p * dr), max_bond, weight_tol, expanded)
    state.tensors[site] = vh.reshape(-1, p, dr)
    state.tensors[site - 1] = np.einsum("ajb,bc->ajc", prev, u * sv[None, :])
    state.center = site - 1


def ground_state(
    hamiltonian: LocalHamiltonian,
    params: ModelParams,
    *,
    has_spin: bool = True,
    shifts: Optional[Sequence[float]] = None,
    max_bond: Optional[int] = None,
    max_sweeps: int = 200,
    e_tol: float = 1e-10,
    noise: float = EXPANSION_NOISE,
    initial: Optional[MpsState] = None,
    seed: int = 1234,
) -> GroundStateResult:
    """
    Variational ground state by single-site DMRG sweeps with subspace expansion.

    Sweeps start from a seeded random product state (or from ``initial``)
    and run with expansion until the energy changes by less than ``e_tol``
    over one left-right sweep. A last sweep without expansion trims every
    bond to the weight it carries. Boson sites are compressed to
    ``params.d_opt`` optimized states in every local update.

    Args:
        hamiltonian: Hamiltonian in the stored frame
        params: Supplies fock_dim, d_opt, bond_cap and weight_tol
        has_spin: Whether site 0 is the spin
        shifts: Frame of every site (stored on the returned state)
        max_bond: Bond cap of the variational state, params.bond_cap if None
        noise: Relative size of the expansion block, 0 for plain sweeps
        initial: Earlier solution used as the starting point

    Returns:
        GroundStateResult; ``converged`` is False after max_sweeps
    """
    max_bond = params.bond_cap if max_bond is None else max_bond
    validate_int_range(max_bond, "max_bond", 1)
    validate_int_range(max_sweeps, "max_sweeps", 1)
    validate_nonnegative(noise, "noise")
    num_sites = hamiltonian.num_sites
    frame = np.zeros(num_sites) if shifts is None else np.asarray(shifts, dtype=float)

    if initial is None:
        state = _product_state(hamiltonian, params.fock_dim, has_spin, frame, np.random.default_rng(seed))
    else:
        if initial.local_dims != list(hamiltonian.dims):
            raise ValidationError("initial state does not match the Hamiltonian's local dimensions")
        state = _fock_form(initial, frame)
    mpo = hamiltonian.mpo()
    d_opt = params.d_opt

    left_envs: List[Optional[NDArray]] = [None] * (num_sites + 1)
    right_envs: List[Optional[NDArray]] = [None] * (num_sites + 1)
    left_envs[0] = np.ones((1, 1, 1), dtype=complex)
    right_envs[num_sites] = np.ones((1, 1, 1), dtype=complex)
    for k in reversed(range(1, num_sites)):
        right_envs[k] = _update_right(right_envs[k + 1], state.tensors[k], mpo[k])

    def local_update(k: int) -> Tuple[float, NDArray]:
        energy, tensor = _solve_local(left_envs[k], mpo[k], right_envs[k + 1], state.tensors[k])
        if state.is_boson(k):
            tensor = _compress_local(tensor, d_opt)
        return energy, tensor

    sweep_energies: List[float] = []
    energy = np.inf
    converged = False
    sweep_noise = noise

    for sweep in range(max_sweeps):
        for k in range(num_sites):
            energy, tensor = local_update(k)
            if k < num_sites - 1:
                _step_right(state, k, tensor, left_envs[k], mpo[k], max_bond, params.weight_tol, sweep_noise)
                left_envs[k + 1] = _update_left(left_envs[k], state.tensors[k], mpo[k])
            else:
                state.tensors[k] = tensor
        for k in reversed(range(num_sites)):
            energy, tensor = local_update(k)
            if k > 0:
                _step_left(state, k, tensor, right_envs[k + 1], mpo[k], max_bond, params.weight_tol, sweep_noise)
                right_envs[k] = _update_right(right_envs[k + 1], state.tensors[k], mpo[k])
            else:
                state.tensors[k] = tensor

        if not np.isfinite(energy):
            raise NumericalError("DMRG produced a non-finite energy")
        logger.debug(
            "DMRG sweep %d: E=%.12f, bonds %s, noise %g",
            sweep + 1, energy, state.bond_dims, sweep_noise,
        )
        settled = bool(sweep_energies) and abs(sweep_energies[-1] - energy) < e_tol
        sweep_energies.append(energy)
        if settled and sweep_noise == 0:
            converged = True
            break
        if settled:
            # one more sweep without expansion trims the bonds
            sweep_noise = 0.0

    if not converged:
        logger.warning("DMRG did not converge in %d sweeps (last E=%.12f)", max_sweeps, energy)

    state.center = 0
    for site in state.boson_sites():
        if d_opt < state.obb[site].shape[1]:
            state = obb_update(state, site, d_opt)
    canonicalize(state, 0)

    return GroundStateResult(state=state, energy=float(energy), sweep_energies=sweep_energies, converged=converged)


def measured_shifts(state: MpsState) -> NDArray[np.float64]:
    """Physical <x_k> of every site: stored-frame <x> plus the frame shift."""
    x_op = local_operators(state.fock_dim).x
    values = np.zeros(state.num_sites)
    for site in state.boson_sites():
        stored = expect_local(state, x_op, site, frame=False).real
        values[site] = stored + state.shifts[site]
    return values


def polarized_bath_state(
    params: ModelParams,
    *,
    shifted: bool = True,
    max_bond: Optional[int] = None,
    max_sweeps: int = 200,
    e_tol: float = 1e-10,
    noise: float = EXPANSION_NOISE,
    shift_tol: float = 1e-6,
    damping: float = 0.7,
    max_iterations: int = 100,
    seed: int = 1234,
) -> Tuple[MpsState, ShiftRegister]:
    """
    Bath ground state for a spin frozen in sigma_z = +1.

    With ``shifted`` the frame is moved towards the measured displacements,
    x <- (1 - damping) x + damping <x>, until the largest residual
    |<x> - x| drops below ``shift_tol``. Each DMRG run starts from the
    previous solution. Without ``shifted`` a single unshifted DMRG run is done.

    Returns:
        The bath-only state (in the final frame) and its shift register
    """
    chain = chain_coefficients(params)
    shifts = np.zeros(chain.num_sites)
    previous: Optional[MpsState] = None

    for iteration in range(1, max_iterations + 1):
        hamiltonian = bath_hamiltonian(chain, params.fock_dim, shifts, source=FROZEN_SPIN_SOURCE)
        result = ground_state(
            hamiltonian, params,
            has_spin=False, shifts=shifts, max_bond=max_bond,
            max_sweeps=max_sweeps, e_tol=e_tol, noise=noise, initial=previous, seed=seed,
        )
        if not shifted:
            return result.state, ShiftRegister.zeros(chain.num_sites, params.shift_mode)

        measured = measured_shifts(result.state)
        residual = float(np.max(np.abs(measured - shifts)))
        logger.info("Shift iteration %d: E=%.10f, max residual %.3e", iteration, result.energy, residual)
        if residual < shift_tol:
            return result.state, ShiftRegister(shifts=shifts, mode=params.shift_mode)
        shifts = (1 - damping) * shifts + damping * measured
        previous = result.state

    logger.warning("Shift iteration stopped after %d iterations without converging", max_iterations)
    return result.state, ShiftRegister(shifts=result.state.shifts, mode=params.shift_mode)


def prepare_dynamics_initial(
    params: ModelParams,
    *,
    shifted: bool = True,
    **dmrg_options,
) -> InitialCondition:
    """
    Initial state of a real-time run: free spin up times the polarized bath.

    In the shifted basis the epsilon shift is applied and the gates of the
    full Hamiltonian are built in the final frame.
    """
    bath, register = polarized_bath_state(params, shifted=shifted, **dmrg_options)
    state = attach_spin(bath, "up")
    canonicalize(state, 0)

    if shifted:
        state = apply_epsilon_shift(state, params.epsilon)
        register = register.scaled(params.epsilon)
        canonicalize(state, 0)

    chain = chain_coefficients(params)
    frame = state.shifts if shifted else None
    gates, hamiltonian = spin_boson_gates(chain, params, frame)
    return InitialCondition(state=state, register=register, gates=gates, hamiltonian=hamiltonian)
