"""
Matrix product states with a per-site optimized boson basis.

Each site k stores a tensor A~[k] with legs (left bond, optimized index,
right bond) and an isometry V[k] with orthonormal rows mapping the
optimized index onto the local Fock basis:

    A[k][n] = sum_j A~[k][j] V[k][j, n]

The spin site keeps V = 1 (dimension 2) and is never compressed. Purified
states use a doubled local space (physical x ancilla, d^2 states).

Layout of the physical tensor: ``(vL, n, vR)``.
"""

from __future__ import annotations

from dataclasses import dataclass
import logging
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
import scipy.linalg

from .config import ModelParams
from .shifts import annihilation, shifted_operator
from .validation import (
    CheckpointError,
    NumericalError,
    ValidationError,
    validate_int_range,
    validate_site,
)

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
SPIN_UP = np.array([1.0, 0.0], dtype=complex)
SPIN_DOWN = np.array([0.0, 1.0], dtype=complex)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


class SvdResult(NamedTuple):
    """Truncated SVD: theta ~ left @ diag(singular_values) @ right."""

    left: NDArray[np.complex128]
    singular_values: NDArray[np.float64]
    right: NDArray[np.complex128]
    discarded_weight: float


class OptimalBasis(NamedTuple):
    """Dominant eigenvectors of a single-site reduced density matrix."""

    basis: NDArray[np.complex128]
    kept_weight: float
    eigenvalues: NDArray[np.float64]


@dataclass
class MpsState:
    """
    Finite MPS over the spin-boson chain (or over the bath alone).

    Attributes:
        tensors: Site tensors A~[k], shape (D_k, d_opt_k, D_{k+1})
        obb: Basis transforms V[k], shape (d_opt_k, local_dim_k)
        shifts: Displacement <x_k> of each site's frame (0 on the spin)
        fock_dim: Boson truncation d
        has_spin: True if site 0 is the spin
        purified: True if boson sites carry an ancilla (local dim d^2)
        center: Orthogonality center, None when no canonical form is known
        trunc_weight: Accumulated discarded weight
        shift_norm_loss: Norm lost by the last epsilon shift
    """

    tensors: List[NDArray[np.complex128]]
    obb: List[NDArray[np.complex128]]
    shifts: NDArray[np.float64]
    fock_dim: int
    has_spin: bool = True
    purified: bool = False
    center: Optional[int] = 0
    trunc_weight: float = 0.0
    shift_norm_loss: float = 0.0

    @property
    def num_sites(self) -> int:
        return len(self.tensors)

    @property
    def local_dims(self) -> List[int]:
        return [v.shape[1] for v in self.obb]

    @property
    def bond_dims(self) -> List[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def is_boson(self, site: int) -> bool:
        return not (self.has_spin and site == 0)

    def boson_sites(self) -> range:
        return range(1 if self.has_spin else 0, self.num_sites)

    def copy(self) -> "MpsState":
        return MpsState(
            tensors=[t.copy() for t in self.tensors],
            obb=[v.copy() for v in self.obb],
            shifts=self.shifts.copy(),
            fock_dim=self.fock_dim,
            has_spin=self.has_spin,
            purified=self.purified,
            center=self.center,
            trunc_weight=self.trunc_weight,
            shift_norm_loss=self.shift_norm_loss,
        )

    def physical_tensor(self, site: int) -> NDArray[np.complex128]:
        """Site tensor in the local Fock basis."""
        return np.einsum("ajb,jn->anb", self.tensors[site], self.obb[site])

    def embed_operator(self, op: NDArray, site: Optional[int] = None) -> NDArray[np.complex128]:
        """Lift a d x d boson operator onto the local space (ancilla untouched)."""
        op = np.asarray(op, dtype=complex)
        if site is not None and not self.is_boson(site):
            return op
        if self.purified and op.shape == (self.fock_dim, self.fock_dim):
            return np.kron(op, np.eye(self.fock_dim))
        return op

    def norm(self) -> float:
        """<Psi|Psi>."""
        env = np.ones((1, 1), dtype=complex)
        for site in range(self.num_sites):
            env = _transfer_left(env, self.physical_tensor(site))
        return float(env[0, 0].real)

    def normalize(self) -> "MpsState":
        value = self.norm()
        if value <= 0:
            raise NumericalError("cannot normalize a state of zero norm")
        site = 0 if self.center is None else self.center
        self.tensors[site] = self.tensors[site] / np.sqrt(value)
        return self

    def apply_site_matrix(self, site: int, matrix: NDArray) -> None:
        """
        Apply a local matrix in the Fock basis; the site's basis is expanded
        to the full local space and the canonical form is kept only if the
        site is the center.
        """
        validate_site(site, self.num_sites)
        matrix = np.asarray(matrix, dtype=complex)
        dim = self.obb[site].shape[1]
        if matrix.shape != (dim, dim):
            raise ValidationError(f"site matrix shape {matrix.shape} does not match local dim {dim}")
        self.tensors[site] = np.einsum("nm,amb->anb", matrix, self.physical_tensor(site))
        self.obb[site] = np.eye(dim, dtype=complex)
        if self.center != site:
            self.center = None

    def to_dense(self) -> NDArray[np.complex128]:
        """Full state vector in the stored (shifted) Fock basis; small chains only."""
        vec = np.ones((1, 1), dtype=complex)
        for site in range(self.num_sites):
            phys = self.physical_tensor(site)
            vec = np.einsum("xa,anb->xnb", vec, phys).reshape(-1, phys.shape[2])
        return vec[:, 0]


def init_product_state(params: ModelParams, spin: str = "up") -> MpsState:
    """
    Factorized state: spin up or down, every boson site in the vacuum.

    Bond dimension 1, V[k] the first d_opt rows of the identity, no shifts.
    """
    if spin not in ("up", "down"):
        raise ValidationError(f"spin must be 'up' or 'down', got {spin!r}")

    d = params.fock_dim
    d_opt = params.d_opt
    spin_vec = SPIN_UP if spin == "up" else SPIN_DOWN

    tensors = [spin_vec.reshape(1, 2, 1).copy()]
    obb = [np.eye(2, dtype=complex)]
    for _ in range(params.num_bosons):
        tensor = np.zeros((1, d_opt, 1), dtype=complex)
        tensor[0, 0, 0] = 1.0
        tensors.append(tensor)
        obb.append(np.eye(d, dtype=complex)[:d_opt].copy())

    return MpsState(
        tensors=tensors,
        obb=obb,
        shifts=np.zeros(params.chain_length),
        fock_dim=d,
    )


def attach_spin(bath: MpsState, spin: str = "up") -> MpsState:
    """Prepend a spin site in a definite sigma_z state to a bath-only MPS."""
    if bath.has_spin:
        raise ValidationError("state already carries a spin site")
    spin_vec = SPIN_UP if spin == "up" else SPIN_DOWN
    return MpsState(
        tensors=[spin_vec.reshape(1, 2, 1).copy()] + [t.copy() for t in bath.tensors],
        obb=[np.eye(2, dtype=complex)] + [v.copy() for v in bath.obb],
        shifts=np.concatenate(([0.0], bath.shifts)),
        fock_dim=bath.fock_dim,
        has_spin=True,
        purified=bath.purified,
        center=None if bath.center is None else bath.center + 1,
        trunc_weight=bath.trunc_weight,
        shift_norm_loss=bath.shift_norm_loss,
    )


# -- canonical forms ---------------------------------------------------------

def _qr(matrix: NDArray) -> Tuple[NDArray, NDArray]:
    q, r = scipy.linalg.qr(matrix, mode="economic")
    return q, r


def _move_center_right(state: MpsState, site: int) -> None:
    tensor = state.tensors[site]
    dl, p, dr = tensor.shape
    q, r = _qr(tensor.reshape(dl * p, dr))
    state.tensors[site] = q.reshape(dl, p, q.shape[1])
    state.tensors[site + 1] = np.einsum("ab,bjc->ajc", r, state.tensors[site + 1])


def _move_center_left(state: MpsState, site: int) -> None:
    tensor = state.tensors[site]
    dl, p, dr = tensor.shape
    q, r = _qr(tensor.reshape(dl, p * dr).T)
    state.tensors[site] = q.T.reshape(q.shape[1], p, dr)
    state.tensors[site - 1] = np.einsum("ajb,cb->ajc", state.tensors[site - 1], r)


def canonicalize(state: MpsState, new_center: int) -> MpsState:
    """
    Bring the state into mixed-canonical form around ``new_center`` (in place).

    Tensors left of the center become left isometries, tensors right of it
    right isometries. Only the gauge changes.
    """
    validate_site(new_center, state.num_sites)

    if state.center is None:
        for site in range(state.num_sites - 1):
            _move_center_right(state, site)
        state.center = state.num_sites - 1

    while state.center < new_center:
        _move_center_right(state, state.center)
        state.center += 1
    while state.center > new_center:
        _move_center_left(state, state.center)
        state.center -= 1

    return state


# -- truncation ----------------------------------------------------------------

def svd_truncate(theta: NDArray, max_bond: int, weight_tol: float = 1e-12) -> SvdResult:
    """
    SVD of a matrix keeping at most ``max_bond`` values.

    The tail whose relative weight stays below ``weight_tol`` is always
    dropped. ``discarded_weight`` is the dropped sum of squared singular
    values relative to the total.

    Raises:
        NumericalError: If theta is not finite or identically zero
    """
    theta = np.asarray(theta)
    if not np.all(np.isfinite(theta)):
        raise NumericalError("svd_truncate received non-finite entries")

    try:
        u, sv, vh = scipy.linalg.svd(theta, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        logger.debug("gesdd did not converge, falling back to gesvd")
        u, sv, vh = scipy.linalg.svd(theta, full_matrices=False, lapack_driver="gesvd")

    weights = sv ** 2
    total = weights.sum()
    if total <= 0:
        raise NumericalError("svd_truncate received a zero tensor (degenerate state)")

    # tail[i] = relative weight of values i, i+1, ...
    tail = np.cumsum(weights[::-1])[::-1] / total
    rank = int(np.count_nonzero(tail > weight_tol))
    keep = max(1, min(max_bond, rank))
    discarded = float(weights[keep:].sum() / total)

    return SvdResult(
        left=u[:, :keep],
        singular_values=sv[:keep],
        right=vh[:keep, :],
        discarded_weight=discarded,
    )


def reduced_density_matrix(phys: NDArray, axis: int = 1) -> NDArray[np.complex128]:
    """rho[n, m] = sum over the other legs of phys[..n..] conj(phys[..m..])."""
    moved = np.moveaxis(phys, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    return flat @ flat.conj().T


def optimal_basis(rho: NDArray, d_opt: int) -> OptimalBasis:
    """
    Rows of the returned basis are the d_opt dominant eigenvectors of rho.

    ``kept_weight`` is their share of the trace.
    """
    dim = rho.shape[0]
    if d_opt > dim:
        raise ValidationError(f"d_opt {d_opt} exceeds local dimension {dim}")
    evals, evecs = scipy.linalg.eigh(rho)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    trace = float(evals.sum())
    if trace <= 0:
        raise NumericalError("reduced density matrix has zero trace")
    kept = float(evals[:d_opt].sum() / trace)
    return OptimalBasis(basis=evecs[:, :d_opt].T.copy(), kept_weight=kept, eigenvalues=evals)


def obb_update(state: MpsState, site: int, d_opt: int) -> MpsState:
    """
    Recompute V[site] from the site's reduced density matrix.

    The center is moved to ``site`` first so the reduced density matrix is
    exact. The discarded eigenvalue weight is added to ``trunc_weight``.

    Raises:
        ValidationError: For the spin site or d_opt larger than the local space
    """
    validate_site(site, state.num_sites)
    if not state.is_boson(site):
        raise ValidationError("the spin site has no optimized basis")
    validate_int_range(d_opt, "d_opt", 1, state.obb[site].shape[1])

    new_state = canonicalize(state.copy(), site)
    phys = new_state.physical_tensor(site)
    result = optimal_basis(reduced_density_matrix(phys), d_opt)

    new_state.tensors[site] = np.einsum("anb,jn->ajb", phys, result.basis.conj())
    new_state.obb[site] = result.basis
    new_state.trunc_weight += 1.0 - result.kept_weight
    return new_state


# -- observables ---------------------------------------------------------------

def _transfer_left(env: NDArray, phys: NDArray, op: Optional[NDArray] = None) -> NDArray:
    # env[bra, ket] -> env over one more site
    if op is None:
        return np.einsum("ab,anc,bnd->cd", env, phys.conj(), phys, optimize=True)
    return np.einsum("ab,anc,nm,bmd->cd", env, phys.conj(), op, phys, optimize=True)


def _transfer_right(env: NDArray, phys: NDArray) -> NDArray:
    return np.einsum("cd,anc,bnd->ab", env, phys.conj(), phys, optimize=True)


def left_environments(state: MpsState) -> List[NDArray]:
    """envs[k] contracts sites 0 ... k-1 (envs[0] is trivial)."""
    envs = [np.ones((1, 1), dtype=complex)]
    for site in range(state.num_sites):
        envs.append(_transfer_left(envs[-1], state.physical_tensor(site)))
    return envs


def right_environments(state: MpsState) -> List[NDArray]:
    """envs[k] contracts sites k ... L-1 (envs[L] is trivial)."""
    envs: List[NDArray] = [np.ones((1, 1), dtype=complex)]
    for site in reversed(range(state.num_sites)):
        envs.append(_transfer_right(envs[-1], state.physical_tensor(site)))
    return envs[::-1]


def _site_operator_in_frame(state: MpsState, site: int, operator: NDArray, frame: bool) -> NDArray:
    operator = np.asarray(operator, dtype=complex)
    shift = state.shifts[site]
    if frame and shift != 0:
        if operator.shape != (state.fock_dim, state.fock_dim):
            raise ValidationError(
                f"shifted site {site} needs a {state.fock_dim}x{state.fock_dim} boson operator, "
                f"got {operator.shape}"
            )
        operator = shifted_operator(operator, shift)
    op = state.embed_operator(operator, site)
    dim = state.obb[site].shape[1]
    if op.shape != (dim, dim):
        raise ValidationError(f"operator shape {op.shape} does not match local dim {dim}")
    return op


def expect_local(
    state: MpsState,
    operator: NDArray,
    site: int,
    envs: Optional[Tuple[List[NDArray], List[NDArray]]] = None,
    frame: bool = True,
) -> complex:
    """
    <Psi|o_site|Psi> / <Psi|Psi> for an operator given in the physical basis.

    On shifted sites the operator is brought into the stored frame by the
    substitution b -> b + x/sqrt(2) (see shifts.shifted_operator), the same
    convention one_body_matrix uses. ``frame=False`` skips that step for
    operators already written in the stored frame.
    """
    validate_site(site, state.num_sites)
    op = _site_operator_in_frame(state, site, operator, frame)
    left, right = envs if envs is not None else (left_environments(state), right_environments(state))
    phys = state.physical_tensor(site)
    value = np.einsum("cd,cd->", _transfer_left(left[site], phys, op), right[site + 1])
    return complex(value / right[0][0, 0].real)


def expect_bond(
    state: MpsState,
    operator: NDArray,
    site: int,
    envs: Optional[Tuple[List[NDArray], List[NDArray]]] = None,
) -> complex:
    """
    <Psi|o_{site,site+1}|Psi> / <Psi|Psi> for a two-site operator given in
    the stored frame (no shift correction).
    """
    validate_site(site + 1, state.num_sites)
    left, right = envs if envs is not None else (left_environments(state), right_environments(state))
    p1 = state.physical_tensor(site)
    p2 = state.physical_tensor(site + 1)
    d1, d2 = p1.shape[1], p2.shape[1]
    theta = np.einsum("anb,bmc->anmc", p1, p2)
    op = np.asarray(operator).reshape(d1, d2, d1, d2)
    value = np.einsum(
        "ab,anmc,nmkl,bkld,cd->",
        left[site], theta.conj(), op, theta, right[site + 2],
        optimize=True,
    )
    return complex(value / right[0][0, 0].real)


def one_body_matrix(state: MpsState) -> NDArray[np.complex128]:
    """
    C[k, k'] = <b_k^dag b_k'> of the physical (unshifted) boson operators.

    Indices run over boson sites. The frame shift enters through
    b_physical = b + x_k / sqrt(2).
    """
    sites = list(state.boson_sites())
    left, right = left_environments(state), right_environments(state)
    norm = right[0][0, 0].real
    b = state.embed_operator(annihilation(state.fock_dim))
    bdag = b.conj().T

    raw = np.zeros((len(sites), len(sites)), dtype=complex)
    mean_b = np.zeros(len(sites), dtype=complex)

    for i, k in enumerate(sites):
        phys_k = state.physical_tensor(k)
        mean_b[i] = np.einsum("cd,cd->", _transfer_left(left[k], phys_k, b), right[k + 1]) / norm
        raw[i, i] = np.einsum(
            "cd,cd->", _transfer_left(left[k], phys_k, bdag @ b), right[k + 1]
        ) / norm
        env = _transfer_left(left[k], phys_k, bdag)
        for j in range(i + 1, len(sites)):
            kp = sites[j]
            phys_kp = state.physical_tensor(kp)
            raw[i, j] = np.einsum("cd,cd->", _transfer_left(env, phys_kp, b), right[kp + 1]) / norm
            raw[j, i] = np.conj(raw[i, j])
            env = _transfer_left(env, phys_kp)

    a = state.shifts[sites] / np.sqrt(2)
    corr = (
        raw
        + np.outer(a, mean_b)
        + np.outer(mean_b.conj(), a)
        + np.outer(a, a)
    )
    return 0.5 * (corr + corr.conj().T)


def overlap(bra: MpsState, ket: MpsState) -> complex:
    """<bra|ket> of the stored representations."""
    if bra.local_dims != ket.local_dims:
        raise ValidationError("states have different local dimensions")
    env = np.ones((1, 1), dtype=complex)
    for site in range(bra.num_sites):
        env = np.einsum(
            "ab,anc,bnd->cd", env, bra.physical_tensor(site).conj(), ket.physical_tensor(site),
            optimize=True,
        )
    return complex(env[0, 0])


def bond_entropies(state: MpsState) -> NDArray[np.float64]:
    """Von Neumann entanglement entropy across every bond."""
    work = canonicalize(state.copy(), 0)
    entropies = []
    for site in range(work.num_sites - 1):
        tensor = work.tensors[site]
        dl, p, dr = tensor.shape
        sv = scipy.linalg.svd(tensor.reshape(dl * p, dr), compute_uv=False)
        probs = sv ** 2 / np.sum(sv ** 2)
        probs = probs[probs > 1e-16]
        entropies.append(float(-np.sum(probs * np.log(probs))))
        _move_center_right(work, site)
        work.center = site + 1
    return np.array(entropies)


# -- checkpoints -----------------------------------------------------------------

def save_checkpoint(path: Path | str, state: MpsState, **extra: float) -> Path:
    """
    Write every tensor, basis, shift and bookkeeping field to an .npz file.

    Extra scalars (time, step counters) are stored under ``extra_<name>``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: Dict[str, Any] = {
        "version": np.array(CHECKPOINT_VERSION),
        "num_sites": np.array(state.num_sites),
        "fock_dim": np.array(state.fock_dim),
        "has_spin": np.array(state.has_spin),
        "purified": np.array(state.purified),
        "center": np.array(-1 if state.center is None else state.center),
        "trunc_weight": np.array(state.trunc_weight),
        "shift_norm_loss": np.array(state.shift_norm_loss),
        "shifts": state.shifts,
    }
    for site in range(state.num_sites):
        arrays[f"tensor_{site}"] = state.tensors[site]
        arrays[f"obb_{site}"] = state.obb[site]
    for name, value in extra.items():
        arrays[f"extra_{name}"] = np.array(value)

    with path.open("wb") as handle:
        np.savez(handle, **arrays)
    return path


def load_checkpoint(path: Path | str) -> Tuple[MpsState, Dict[str, float]]:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointError: If the file is missing or has another version
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")

    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {version} in {path}")
        num_sites = int(data["num_sites"])
        center = int(data["center"])
        state = MpsState(
            tensors=[data[f"tensor_{site}"] for site in range(num_sites)],
            obb=[data[f"obb_{site}"] for site in range(num_sites)],
            shifts=data["shifts"],
            fock_dim=int(data["fock_dim"]),
            has_spin=bool(data["has_spin"]),
            purified=bool(data["purified"]),
            center=None if center < 0 else center,
            trunc_weight=float(data["trunc_weight"]),
            shift_norm_loss=float(data["shift_norm_loss"]),
        )
        extra = {
            key[len("extra_"):]: float(data[key]) for key in data.files if key.startswith("extra_")
        }
    return state, extra
