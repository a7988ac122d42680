"""
Finite-temperature states by purification.

Every boson site carries an ancilla copy, so the local space has d^2
states (index n * d + ancilla). The bath density matrix
exp(-beta [H - mu E]) / Z is prepared by imaginary-time evolution of the
infinite-temperature purification over beta / 2, acting on the physical
legs only.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np

from .config import ModelParams, ThermalParams
from .dmrg import measured_shifts
from .hamiltonian import bath_hamiltonian
from .model import chain_coefficients
from .mps import MpsState, attach_spin, canonicalize, expect_local
from .shifts import local_operators, shift_matrix
from .tebd import TrajectoryRecord, evolve, gates_from_hamiltonian, spin_boson_gates, tebd_step
from .validation import ValidationError

logger = logging.getLogger(__name__)

DEFAULT_MAX_THERMAL_FOCK = 6
# largest occupation change tolerated between dtau and dtau/2
CONVERGENCE_TOL = 1e-4


def infinite_T_state(params: ModelParams) -> MpsState:
    """
    Product of maximally entangled physical-ancilla pairs on the bath sites.

    Each site holds sum_n |n>|n> / sqrt(d); the reduced physical state is 1/d.
    """
    d = params.fock_dim
    pair = np.zeros(d * d, dtype=complex)
    pair[np.arange(d) * d + np.arange(d)] = 1 / np.sqrt(d)

    return MpsState(
        tensors=[pair.reshape(1, d * d, 1).copy() for _ in range(params.num_bosons)],
        obb=[np.eye(d * d, dtype=complex) for _ in range(params.num_bosons)],
        shifts=np.zeros(params.num_bosons),
        fock_dim=d,
        has_spin=False,
        purified=True,
        center=0,
    )


def _cool(
    state: MpsState,
    params: ModelParams,
    thermal: ThermalParams,
) -> MpsState:
    chain = chain_coefficients(params)
    hamiltonian = bath_hamiltonian(chain, params.fock_dim, source=thermal.mu, ancilla=True)

    duration = thermal.beta / 2
    n_steps = max(1, math.ceil(duration / thermal.dtau - 1e-9))
    dtau = duration / n_steps
    gates = gates_from_hamiltonian(hamiltonian, dtau, "imaginary", params.order)
    logger.info("Cooling purification to beta=%g in %d steps of %g", thermal.beta, n_steps, dtau)

    for _ in range(n_steps):
        tebd_step(state, gates, params.bond_cap, params.thermal_d_opt, params.weight_tol)
    return state


def occupations(state: MpsState) -> np.ndarray:
    """<n_k> on every boson site."""
    n_op = local_operators(state.fock_dim).n
    return np.array([expect_local(state, n_op, site).real for site in state.boson_sites()])


def thermal_state(
    params: ModelParams,
    beta: Optional[float] = None,
    mu: Optional[float] = None,
    dtau: Optional[float] = None,
    check_convergence: bool = False,
) -> MpsState:
    """
    Purification of the polarized thermal bath exp(-beta [H - mu E]) / Z.

    E = -eta1 (b1 + b1^dag), so mu = 1/2 is the bath equilibrated to a spin
    frozen up, the bath polarized_bath_state finds at zero temperature. The
    number of imaginary-time steps is rounded up so they cover beta / 2
    exactly. With ``check_convergence`` the preparation is repeated at
    dtau / 2 and a warning is logged if occupations move by more than
    CONVERGENCE_TOL.
    """
    if beta is not None or mu is not None:
        params = params.with_updates(
            beta=params.beta if beta is None else beta,
            mu=params.mu if mu is None else mu,
        )
    thermal = ThermalParams.from_model(params, dtau)

    state = _cool(infinite_T_state(params), params, thermal)

    if check_convergence:
        finer = ThermalParams(beta=thermal.beta, mu=thermal.mu, d2=thermal.d2, dtau=thermal.dtau / 2)
        reference = _cool(infinite_T_state(params), params, finer)
        deviation = float(np.max(np.abs(occupations(state) - occupations(reference))))
        if deviation > CONVERGENCE_TOL:
            logger.warning(
                "Thermal state not converged in dtau: occupations move by %.3g at dtau/2",
                deviation,
            )
        else:
            logger.info("Thermal state converged in dtau (max change %.3g)", deviation)

    return state


def thermal_evolve(
    state: MpsState,
    params: ModelParams,
    t_final: float,
    *,
    max_thermal_fock: int = DEFAULT_MAX_THERMAL_FOCK,
    shifted: bool = False,
    **evolve_options,
) -> TrajectoryRecord:
    """
    Real-time evolution of spin up times a purified thermal bath.

    Gates act on physical legs only and are built in the unshifted basis.
    With ``shifted`` the bath is first moved into the frame of its measured
    displacements and the gates follow that frame.

    Raises:
        ValidationError: If the state is not a purified bath or d exceeds
            ``max_thermal_fock``
    """
    if not state.purified:
        raise ValidationError("thermal_evolve needs a purified state")
    if params.fock_dim > max_thermal_fock:
        raise ValidationError(
            f"fock_dim {params.fock_dim} exceeds max_thermal_fock {max_thermal_fock}; "
            f"gates would be {params.fock_dim ** 4}x{params.fock_dim ** 4}"
        )
    logger.info(
        "Purified gates on boson bonds are %dx%d matrices",
        params.fock_dim ** 4, params.fock_dim ** 4,
    )

    if shifted:
        state = shift_to_displacement(state)
    if not state.has_spin:
        state = attach_spin(state, "up")
    canonicalize(state, 0)

    chain = chain_coefficients(params)
    frame = state.shifts if np.any(state.shifts) else None
    gates, hamiltonian = spin_boson_gates(chain, params, frame, ancilla=True)

    return evolve(
        state, gates, hamiltonian, t_final,
        max_bond=params.bond_cap,
        d_opt=params.thermal_d_opt,
        weight_tol=params.weight_tol,
        **evolve_options,
    )


def shift_to_displacement(state: MpsState) -> MpsState:
    """
    Re-express an unshifted state in the frame of its measured <x_k>.

    The stored tensors are multiplied by the truncated U(-x_k) on each boson
    site and renormalized.
    """
    if np.any(state.shifts):
        raise ValidationError("state is already shifted")
    target = measured_shifts(state)
    new_state = state.copy()
    for site in new_state.boson_sites():
        back = shift_matrix(-target[site], new_state.fock_dim)
        new_state.apply_site_matrix(site, new_state.embed_operator(back, site))
        new_state.shifts[site] = target[site]
    new_state.normalize()
    logger.info("Bath moved to its measured displacements (max |x| = %.3g)", np.max(np.abs(target)))
    return new_state
