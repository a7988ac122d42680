"""
Trotter-Suzuki gates and TEBD sweeps over the spin-boson chain.

Bonds are numbered by their left site. Bonds 0, 2, 4, ... form the even
layer and bonds 1, 3, ... the odd layer. A first-order step applies the odd
layer then the even layer; a second-order step applies half an odd step, a
full even step and another half odd step.

After every two-site gate both touched boson sites get a fresh optimized
basis and the bond is truncated by SVD.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
import scipy.linalg

from .config import ModelParams
from .hamiltonian import LocalHamiltonian, spin_boson_hamiltonian
from .model import ChainCoefficients
from .mps import (
    SIGMA_Z,
    MpsState,
    bond_entropies,
    canonicalize,
    expect_bond,
    expect_local,
    left_environments,
    one_body_matrix,
    optimal_basis,
    reduced_density_matrix,
    right_environments,
    save_checkpoint,
    svd_truncate,
)
from .shifts import sandwich_gate, shift_matrix
from .validation import (
    NumericalError,
    TruncationBudgetExceeded,
    ValidationError,
    VALID_GATE_KINDS,
    VALID_SHIFT_MODES,
    VALID_TROTTER_ORDERS,
    validate_choice,
    validate_positive,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class GateSet:
    """
    Two-site evolution operators grouped by layer.

    Attributes:
        dt: Time step (imaginary-time step for kind 'imaginary')
        kind: 'real' for exp(-i h dt), 'imaginary' for exp(-h dt)
        order: Trotter order
        even_gates: Full-step gates of bonds 0, 2, ...
        odd_gates: Full-step gates of bonds 1, 3, ...
        shift_mode: How the shifted basis entered the gates
        half_odd_gates: Half-step odd gates (second order only)
        site_gate: Full-step gate of a chain with a single site
    """

    dt: float
    kind: str
    order: int
    even_gates: Dict[int, NDArray[np.complex128]]
    odd_gates: Dict[int, NDArray[np.complex128]]
    shift_mode: str = "substitute"
    half_odd_gates: Dict[int, NDArray[np.complex128]] = field(default_factory=dict)
    site_gate: Optional[NDArray[np.complex128]] = None

    def layers(self) -> List[Dict[int, NDArray[np.complex128]]]:
        if self.order == 1:
            return [self.odd_gates, self.even_gates]
        return [self.half_odd_gates, self.even_gates, self.half_odd_gates]

    def gates(self) -> Iterator[NDArray[np.complex128]]:
        yield from self.even_gates.values()
        yield from self.odd_gates.values()


class Snapshot(NamedTuple):
    """Bath correlations at one instant."""

    t: float
    correlation: NDArray[np.complex128]
    entropies: NDArray[np.float64]

    @property
    def occupations(self) -> NDArray[np.float64]:
        return np.real(np.diag(self.correlation))


@dataclass
class TrajectoryRecord:
    """
    Observables of one time evolution.

    ``trunc_err`` holds the weight discarded since the previous row, so
    the column sums to the total discarded weight of the run.
    """

    times: List[float] = field(default_factory=list)
    sigma_z: List[float] = field(default_factory=list)
    norm: List[float] = field(default_factory=list)
    energy: List[float] = field(default_factory=list)
    trunc_err: List[float] = field(default_factory=list)
    snapshots: List[Snapshot] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    def append(self, t: float, sigma_z: float, norm: float, energy: float, trunc_err: float) -> None:
        if self.times and t <= self.times[-1]:
            raise ValidationError(f"trajectory times must increase, got {t} after {self.times[-1]}")
        self.times.append(float(t))
        self.sigma_z.append(float(sigma_z))
        self.norm.append(float(norm))
        self.energy.append(float(energy))
        self.trunc_err.append(float(trunc_err))

    @property
    def total_trunc_err(self) -> float:
        return float(np.sum(self.trunc_err))

    def arrays(self) -> Dict[str, NDArray[np.float64]]:
        return {
            "t": np.asarray(self.times),
            "sigma_z": np.asarray(self.sigma_z),
            "norm": np.asarray(self.norm),
            "energy": np.asarray(self.energy),
            "trunc_err": np.asarray(self.trunc_err),
        }


# -- gates -----------------------------------------------------------------------

def local_terms(
    chain: ChainCoefficients,
    params: ModelParams,
    shifts: Optional[Sequence[float]] = None,
    ancilla: bool = False,
) -> List[NDArray[np.complex128]]:
    """Two-site terms h_{k,k+1} of the chain Hamiltonian; their sum is H."""
    return spin_boson_hamiltonian(chain, params, shifts, ancilla).bond_terms()


def exponentiate(term: NDArray, step: float, kind: str) -> NDArray[np.complex128]:
    """
    exp(-i h step) or exp(-h step) of a Hermitian matrix by eigendecomposition.

    Raises:
        NumericalError: If the term is not Hermitian
    """
    validate_choice(kind, "gate kind", VALID_GATE_KINDS)
    scale = max(1.0, float(np.linalg.norm(term)))
    if np.linalg.norm(term - term.conj().T) > HERMITIAN_TOL * scale:
        raise NumericalError("local term is not Hermitian")

    evals, evecs = scipy.linalg.eigh(term)
    phases = np.exp(-1j * evals * step) if kind == "real" else np.exp(-evals * step)
    return (evecs * phases) @ evecs.conj().T


def _frame_matrix(x: float, dim: int, fock_dim: int) -> NDArray[np.complex128]:
    if x == 0 or dim == 2:
        return np.eye(dim, dtype=complex)
    u = shift_matrix(x, fock_dim)
    if dim == fock_dim ** 2:
        return np.kron(u, np.eye(fock_dim))
    return u


def _shift_gate(gate, bond, shifts, dims, fock_dim):
    x_left, x_right = shifts[bond], shifts[bond + 1]
    dl, dr = dims[bond], dims[bond + 1]
    if dr == fock_dim:
        return sandwich_gate(gate, x_left, x_right, fock_dim, left_dim=dl)
    frame = np.kron(_frame_matrix(x_left, dl, fock_dim), _frame_matrix(x_right, dr, fock_dim))
    return frame.conj().T @ gate @ frame


def build_gates(
    terms: Sequence[NDArray],
    dt: float,
    kind: str = "real",
    order: int = 2,
    shifts: Optional[Sequence[float]] = None,
    shift_mode: str = "substitute",
    dims: Optional[Sequence[int]] = None,
    fock_dim: Optional[int] = None,
) -> GateSet:
    """
    Exponentiate bond terms into a GateSet.

    In 'substitute' mode the terms are expected in the shifted basis
    already and ``shifts`` is ignored. In 'sandwich' mode the terms are
    unshifted and every gate is conjugated with the truncated shift
    matrices of its two sites, which needs ``dims`` and ``fock_dim``.
    """
    validate_positive(dt, "dt")
    validate_choice(kind, "gate kind", VALID_GATE_KINDS)
    validate_choice(order, "Trotter order", VALID_TROTTER_ORDERS)
    validate_choice(shift_mode, "shift mode", VALID_SHIFT_MODES)

    sandwich = shift_mode == "sandwich" and shifts is not None and np.any(np.asarray(shifts) != 0)
    if sandwich and (dims is None or fock_dim is None):
        raise ValidationError("sandwich gates need the local dims and fock_dim")

    def gate(bond: int, step: float) -> NDArray[np.complex128]:
        g = exponentiate(np.asarray(terms[bond]), step, kind)
        if sandwich:
            g = _shift_gate(g, bond, shifts, dims, fock_dim)
        return g

    even = {bond: gate(bond, dt) for bond in range(0, len(terms), 2)}
    odd = {bond: gate(bond, dt) for bond in range(1, len(terms), 2)}
    half_odd = {bond: gate(bond, dt / 2) for bond in odd} if order == 2 else {}

    return GateSet(
        dt=dt,
        kind=kind,
        order=order,
        even_gates=even,
        odd_gates=odd,
        shift_mode=shift_mode,
        half_odd_gates=half_odd,
    )


def gates_from_hamiltonian(
    hamiltonian: LocalHamiltonian,
    dt: float,
    kind: str = "real",
    order: int = 2,
) -> GateSet:
    """GateSet of a Hamiltonian written in the stored frame (any chain length)."""
    if hamiltonian.num_sites > 1:
        return build_gates(hamiltonian.bond_terms(), dt, kind, order)
    return GateSet(
        dt=dt,
        kind=kind,
        order=order,
        even_gates={},
        odd_gates={},
        site_gate=exponentiate(hamiltonian.onsite[0], dt, kind),
    )


def spin_boson_gates(
    chain: ChainCoefficients,
    params: ModelParams,
    shifts: Optional[Sequence[float]] = None,
    kind: str = "real",
    ancilla: bool = False,
) -> Tuple[GateSet, LocalHamiltonian]:
    """
    Gates of the full Hamiltonian in the frame given by ``shifts``.

    Returns the gates and the shifted Hamiltonian used for energies.
    """
    shifted = spin_boson_hamiltonian(chain, params, shifts, ancilla)
    if params.shift_mode == "substitute" or shifts is None:
        gates = build_gates(shifted.bond_terms(), params.dt, kind, params.order)
    else:
        plain = spin_boson_hamiltonian(chain, params, None, ancilla)
        gates = build_gates(
            plain.bond_terms(), params.dt, kind, params.order,
            shifts=shifts, shift_mode="sandwich", dims=plain.dims, fock_dim=params.fock_dim,
        )
    return gates, shifted


# -- sweeps ----------------------------------------------------------------------

def _site_d_opt(state: MpsState, site: int, d_opt: int) -> int:
    if not state.is_boson(site):
        return 2
    return min(d_opt, state.obb[site].shape[1])


def apply_bond_gate(
    state: MpsState,
    bond: int,
    gate: NDArray,
    max_bond: int,
    d_opt: int,
    weight_tol: float = 1e-12,
    move_right: bool = True,
) -> float:
    """
    Apply a two-site gate, refresh both optimized bases and truncate the bond.

    The state is updated in place. Returns the discarded weight relative to
    the norm of the gated block.
    """
    if state.center is None or state.center < bond:
        canonicalize(state, bond)
    elif state.center > bond + 1:
        canonicalize(state, bond + 1)

    p1 = state.physical_tensor(bond)
    p2 = state.physical_tensor(bond + 1)
    d1, d2 = p1.shape[1], p2.shape[1]
    theta = np.einsum("anb,bmc->anmc", p1, p2)
    theta = np.einsum("nmkl,aklc->anmc", gate.reshape(d1, d2, d1, d2), theta, optimize=True)
    weight = float(np.vdot(theta, theta).real)
    if not math.isfinite(weight) or weight <= 0:
        raise NumericalError(f"gate on bond {bond} produced a zero or invalid block")

    bases = []
    for axis, site in ((1, bond), (2, bond + 1)):
        if state.is_boson(site):
            rho = reduced_density_matrix(theta, axis=axis)
            bases.append(optimal_basis(rho, _site_d_opt(state, site, d_opt)).basis)
        else:
            bases.append(np.eye(2, dtype=complex))
    theta = np.einsum("anmc,jn,km->ajkc", theta, bases[0].conj(), bases[1].conj(), optimize=True)
    obb_loss = max(0.0, 1.0 - float(np.vdot(theta, theta).real) / weight)

    dl, p1_opt, p2_opt, dr = theta.shape
    svd = svd_truncate(theta.reshape(dl * p1_opt, p2_opt * dr), max_bond, weight_tol)
    keep = len(svd.singular_values)
    left = svd.left
    right = svd.right
    if move_right:
        right = svd.singular_values[:, None] * right
    else:
        left = left * svd.singular_values[None, :]

    state.tensors[bond] = left.reshape(dl, p1_opt, keep)
    state.tensors[bond + 1] = right.reshape(keep, p2_opt, dr)
    state.obb[bond] = bases[0]
    state.obb[bond + 1] = bases[1]
    state.center = bond + 1 if move_right else bond

    discarded = obb_loss + (1.0 - obb_loss) * svd.discarded_weight
    state.trunc_weight += discarded
    return discarded


def _apply_site_gate(state: MpsState, gate: NDArray, d_opt: int) -> float:
    canonicalize(state, 0)
    phys = state.physical_tensor(0)
    phys = np.einsum("nm,amb->anb", gate, phys)
    rho = reduced_density_matrix(phys)
    result = optimal_basis(rho, _site_d_opt(state, 0, d_opt))
    state.tensors[0] = np.einsum("anb,jn->ajb", phys, result.basis.conj())
    state.obb[0] = result.basis
    discarded = 1.0 - result.kept_weight
    state.trunc_weight += discarded
    return discarded


def tebd_step(
    state: MpsState,
    gates: GateSet,
    max_bond: int,
    d_opt: int,
    weight_tol: float = 1e-12,
) -> Tuple[MpsState, float]:
    """
    One Trotter step, updating the state in place.

    Layers alternate their sweep direction. Imaginary-time steps are
    renormalized; real-time steps keep the norm lost to truncation.

    Returns:
        The state and the weight discarded during the step
    """
    discarded = 0.0
    if gates.site_gate is not None:
        discarded += _apply_site_gate(state, gates.site_gate, d_opt)
    else:
        for index, layer in enumerate(gates.layers()):
            bonds = sorted(layer)
            move_right = index % 2 == 0
            if not move_right:
                bonds = bonds[::-1]
            for bond in bonds:
                discarded += apply_bond_gate(
                    state, bond, layer[bond], max_bond, d_opt, weight_tol, move_right
                )

    if gates.kind == "imaginary":
        state.normalize()
    return state, discarded


# -- observation -------------------------------------------------------------------

def energy(state: MpsState, hamiltonian: LocalHamiltonian, envs=None) -> float:
    """<H> of a Hamiltonian written in the stored frame."""
    if envs is None:
        envs = (left_environments(state), right_environments(state))
    if hamiltonian.num_sites == 1:
        return float(expect_local(state, hamiltonian.onsite[0], 0, envs, frame=False).real)
    total = sum(
        expect_bond(state, term, bond, envs) for bond, term in enumerate(hamiltonian.bond_terms())
    )
    return float(np.real(total))


def _observe(state: MpsState, hamiltonian: LocalHamiltonian) -> Tuple[float, float, float]:
    envs = (left_environments(state), right_environments(state))
    norm = float(envs[1][0][0, 0].real)
    sigma_z = float(expect_local(state, SIGMA_Z, 0, envs).real) if state.has_spin else math.nan
    return sigma_z, norm, energy(state, hamiltonian, envs)


def snapshot(state: MpsState, t: float) -> Snapshot:
    return Snapshot(t=float(t), correlation=one_body_matrix(state), entropies=bond_entropies(state))


def evolve(
    state: MpsState,
    gates: GateSet,
    hamiltonian: LocalHamiltonian,
    t_final: float,
    *,
    max_bond: int,
    d_opt: int,
    weight_tol: float = 1e-12,
    observe_every: int = 1,
    snapshot_every: int = 0,
    trunc_budget: float = math.inf,
    checkpoint_every: int = 0,
    checkpoint_path: Optional[Path] = None,
    t_start: float = 0.0,
    record: Optional[TrajectoryRecord] = None,
) -> TrajectoryRecord:
    """
    Run TEBD from ``t_start`` to ``t_final`` recording observables.

    The initial point is recorded unless a ``record`` to continue is given.
    Times are step * dt, so resumed runs reproduce the direct run.

    Raises:
        TruncationBudgetExceeded: Once the discarded weight of the record
            passes ``trunc_budget``; the partial record travels with it
    """
    dt = gates.dt
    first_step = int(round(t_start / dt))
    last_step = int(round(t_final / dt))
    if checkpoint_every and checkpoint_path is None:
        raise ValidationError("checkpoint_every needs a checkpoint_path")

    if record is None:
        record = TrajectoryRecord()
        record.append(first_step * dt, *_observe(state, hamiltonian), 0.0)
        if snapshot_every and state.boson_sites():
            record.snapshots.append(snapshot(state, first_step * dt))

    logger.info(
        "Evolving %d steps (dt=%g, order=%d, %s time)",
        last_step - first_step, dt, gates.order, gates.kind,
    )

    pending = 0.0
    for step in range(first_step + 1, last_step + 1):
        t = step * dt
        state, discarded = tebd_step(state, gates, max_bond, d_opt, weight_tol)
        pending += discarded
        logger.debug("t=%.4f, trunc_err=%.3e", t, discarded)

        over_budget = record.total_trunc_err + pending > trunc_budget
        if step % observe_every == 0 or step == last_step or over_budget:
            record.append(t, *_observe(state, hamiltonian), pending)
            pending = 0.0
        if snapshot_every and step % snapshot_every == 0:
            record.snapshots.append(snapshot(state, t))
        if checkpoint_every and step % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, state, time=t, step=step)
            logger.info("Checkpoint written at t=%g", t)

        if over_budget:
            raise TruncationBudgetExceeded(
                f"discarded weight {record.total_trunc_err:.3g} exceeds budget "
                f"{trunc_budget:.3g} at t={t:g}",
                record=record,
            )

    return record


def imaginary_time_ground_state(
    state: MpsState,
    hamiltonian: LocalHamiltonian,
    dtau: float,
    *,
    max_bond: int,
    d_opt: int,
    order: int = 2,
    weight_tol: float = 1e-12,
    e_tol: float = 1e-10,
    max_steps: int = 20000,
    check_every: int = 10,
) -> Tuple[MpsState, float]:
    """
    Project onto the ground state by imaginary-time TEBD.

    Slower than DMRG; kept as an independent preparation route.
    """
    gates = gates_from_hamiltonian(hamiltonian, dtau, "imaginary", order)
    state = state.copy()
    state.normalize()
    previous = energy(state, hamiltonian)
    for step in range(1, max_steps + 1):
        tebd_step(state, gates, max_bond, d_opt, weight_tol)
        if step % check_every == 0:
            current = energy(state, hamiltonian)
            if abs(previous - current) < e_tol:
                logger.info("Imaginary-time projection converged after %d steps", step)
                return state, current
            previous = current
    logger.warning("Imaginary-time projection did not converge in %d steps", max_steps)
    return state, energy(state, hamiltonian)
