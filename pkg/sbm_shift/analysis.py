"""
Derived physics from trajectories and bath correlations.

Provides:
- Star-basis mode occupations and the resonance peak of their growth
- Renormalized tunneling at zero and finite temperature
- First local minimum of <sigma_z(t)> and the logarithmic N_eff fit
- The time derivative of <sigma_z(t)>
- The coherent / pseudo-coherent classifier
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray
import pandas as pd
from scipy.optimize import brentq

from .model import ChainCoefficients, StarBath, chain_to_star
from .mps import MpsState, one_body_matrix
from .validation import (
    FitError,
    MinimumNotFoundError,
    NoPeakError,
    RecordTooShortError,
    RootCountError,
    ValidationError,
    validate_positive,
)

logger = logging.getLogger(__name__)

# classifier defaults
DEFAULT_N_OSC = 6
DEFAULT_HYSTERESIS = 0.02
DEFAULT_CV_CUTOFF = 0.2
DEFAULT_T_SKIP = 20.0

ROOT_SCAN_POINTS = 1000
ROOT_SCAN_FLOOR = 1e-8
ROOT_XTOL = 1e-10
FLAT_PROFILE_TOL = 1e-12

LABEL_COHERENT = "coherent"
LABEL_PSEUDO_COHERENT = "pseudo-coherent"
LABEL_UNDETERMINED = "undetermined"


@dataclass
class ModeOccupations:
    """Occupations of the star-basis modes, with a reference profile."""

    omega_p: NDArray[np.float64]
    n_p: NDArray[np.float64]
    n0_p: NDArray[np.float64]

    def __post_init__(self) -> None:
        if not (len(self.omega_p) == len(self.n_p) == len(self.n0_p)):
            raise ValidationError("omega_p, n_p and n0_p must have equal lengths")

    @property
    def excess(self) -> NDArray[np.float64]:
        return self.n_p - self.n0_p


@dataclass
class TrajectoryAnalysis:
    """Summary numbers of one <sigma_z(t)> trajectory."""

    t_s: Optional[float]
    sigma_m: Optional[float]
    label: str
    n_eff: Optional[float] = None
    omega_peak: Optional[float] = None
    extras: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        extras = data.pop("extras")
        data.update(extras)
        return data


# -- mode occupations --------------------------------------------------------------

def mode_occupations(
    source: Union[MpsState, NDArray],
    chain: ChainCoefficients,
    reference: Optional[NDArray] = None,
    star: Optional[StarBath] = None,
) -> ModeOccupations:
    """
    n_p = (O C O^T)_pp with C the chain one-body matrix.

    Args:
        source: A state (C is computed from it) or C itself
        chain: Chain whose inverse mapping O is used
        reference: Occupations subtracted by ``excess`` (default zero)
        star: The chain-to-star mapping of ``chain`` if already built
    """
    correlation = one_body_matrix(source) if isinstance(source, MpsState) else np.asarray(source)
    star = chain_to_star(chain) if star is None else star
    if correlation.shape != star.transform.shape:
        raise ValidationError(
            f"one-body matrix {correlation.shape} does not match a chain of {chain.num_sites} sites"
        )
    o = star.transform
    n_p = np.real(np.einsum("pk,kl,pl->p", o, correlation, o))
    n0_p = np.zeros_like(n_p) if reference is None else np.asarray(reference, dtype=float)
    return ModeOccupations(omega_p=star.frequencies, n_p=n_p, n0_p=n0_p)


def _parabola_vertex(y0: float, y1: float, y2: float) -> Tuple[float, float]:
    # vertex offset (in units of the spacing) and value through three equally spaced points
    curvature = y0 - 2 * y1 + y2
    if curvature == 0:
        return 0.0, y1
    offset = 0.5 * (y0 - y2) / curvature
    return offset, y1 - 0.25 * (y0 - y2) * offset


def resonance_peak(occupations: ModeOccupations) -> float:
    """
    Frequency of the largest occupation growth n_p - n0_p.

    The argmax is refined by a parabola through its neighbours in mode
    index, then mapped to frequency by linear interpolation.

    Raises:
        ValidationError: With fewer than three modes
        NoPeakError: If the profile is flat
    """
    profile = occupations.excess
    omega = occupations.omega_p
    if len(profile) < 3:
        raise ValidationError("resonance_peak needs at least three modes")
    if np.ptp(profile) < FLAT_PROFILE_TOL:
        raise NoPeakError("occupation profile is flat")

    j = int(np.argmax(profile))
    if j == 0 or j == len(profile) - 1:
        return float(omega[j])

    offset, _ = _parabola_vertex(profile[j - 1], profile[j], profile[j + 1])
    offset = float(np.clip(offset, -0.5, 0.5))
    return float(np.interp(j + offset, np.arange(len(omega)), omega))


# -- renormalized tunneling -----------------------------------------------------------

def delta_r_zero_T(delta: float, omega_c: float, alpha: float) -> float:
    """
    Adiabatically renormalized tunneling delta (delta / w_c)^(alpha / (1 - alpha)).

    Raises:
        ValidationError: If alpha is outside [0, 1)
    """
    if not 0 <= alpha < 1:
        raise ValidationError(f"alpha must be in [0, 1), got {alpha}")
    validate_positive(delta, "delta")
    validate_positive(omega_c, "omega_c")
    return float(delta * (delta / omega_c) ** (alpha / (1 - alpha)))


def self_consistency_residual(
    delta_r: float,
    delta: float,
    omega_c: float,
    alpha: float,
    beta: float,
) -> float:
    """
    F(dr) = dr/2 - delta/2 exp(-2 pi alpha / (beta dr)) R(dr)^alpha with
    R = (2 + beta dr tanh(beta dr / 2)) / (beta w_c + beta dr tanh(beta dr / 2)).
    """
    x = beta * delta_r * math.tanh(beta * delta_r / 2)
    ratio = (2 + x) / (beta * omega_c + x)
    return delta_r / 2 - delta / 2 * math.exp(-2 * math.pi * alpha / (beta * delta_r)) * ratio ** alpha


def delta_r_finite_T(
    delta: float,
    omega_c: float,
    alpha: float,
    beta: float,
    num_points: int = ROOT_SCAN_POINTS,
) -> Tuple[float, float]:
    """
    The two roots dr1 < dr2 of the finite-temperature self-consistency on (0, delta].

    Sign changes are scanned on a log-spaced grid from delta * 1e-8 up to
    delta and each bracket is refined with Brent's method.

    Raises:
        RootCountError: Unless exactly two roots are found (roots attached)
    """
    for value, name in ((delta, "delta"), (omega_c, "omega_c"), (alpha, "alpha"), (beta, "beta")):
        validate_positive(value, name)

    grid = np.geomspace(delta * ROOT_SCAN_FLOOR, delta, num_points)
    values = np.array([self_consistency_residual(x, delta, omega_c, alpha, beta) for x in grid])

    roots: List[float] = []
    for i in range(len(grid)):
        if values[i] == 0:
            roots.append(float(grid[i]))
        elif i + 1 < len(grid) and values[i] * values[i + 1] < 0:
            roots.append(float(brentq(
                self_consistency_residual, grid[i], grid[i + 1],
                args=(delta, omega_c, alpha, beta), xtol=ROOT_XTOL,
            )))

    if len(roots) != 2:
        raise RootCountError(
            f"expected two roots of the self-consistency equation, found {len(roots)}",
            roots=roots,
        )
    low, high = sorted(roots)
    return low, high


# -- trajectory analysis --------------------------------------------------------------

def _series(trajectory: Any, values: Optional[Sequence[float]] = None) -> Tuple[NDArray, NDArray]:
    if values is not None:
        return np.asarray(trajectory, dtype=float), np.asarray(values, dtype=float)
    if isinstance(trajectory, pd.DataFrame):
        return trajectory["t"].to_numpy(float), trajectory["sigma_z"].to_numpy(float)
    return np.asarray(trajectory.times, dtype=float), np.asarray(trajectory.sigma_z, dtype=float)


def sigma_z_derivative(trajectory: Any, values: Optional[Sequence[float]] = None) -> NDArray[np.float64]:
    """
    d<sigma_z>/dt on the sample times (second-order differences, one-sided at the ends).

    Raises:
        RecordTooShortError: With fewer than three samples
    """
    times, sigma = _series(trajectory, values)
    if len(sigma) < 3:
        raise RecordTooShortError(f"need at least 3 samples, got {len(sigma)}")
    if np.any(np.diff(times) <= 0):
        raise ValidationError("trajectory times must increase")
    return np.gradient(sigma, times, edge_order=2)


def first_local_minimum(trajectory: Any, values: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """
    Time and value of the first local minimum of <sigma_z(t)>.

    Accepts a TrajectoryRecord, a DataFrame with ``t`` and ``sigma_z``
    columns, or ``(times, values)``. The minimum is located on a 3-point
    moving average and refined with a parabola through the raw samples.

    Raises:
        RecordTooShortError: With fewer than five samples
        MinimumNotFoundError: If no local minimum exists
    """
    times, sigma = _series(trajectory, values)
    if len(sigma) < 5:
        raise RecordTooShortError(f"need at least 5 samples, got {len(sigma)}")

    smooth = np.convolve(sigma, np.ones(3) / 3, mode="valid")
    candidates = np.flatnonzero((smooth[1:-1] < smooth[:-2]) & (smooth[1:-1] <= smooth[2:]))
    if candidates.size == 0:
        raise MinimumNotFoundError("trajectory has no local minimum")

    # smooth[j] is centred on sample j + 1
    centre = int(candidates[0]) + 2
    window = slice(max(centre - 1, 0), min(centre + 2, len(sigma)))
    i = window.start + int(np.argmin(sigma[window]))
    i = min(max(i, 1), len(sigma) - 2)

    offset, value = _parabola_vertex(sigma[i - 1], sigma[i], sigma[i + 1])
    if abs(offset) > 1:
        offset, value = 0.0, sigma[i]
    spacing = times[i + 1] - times[i] if offset > 0 else times[i] - times[i - 1]
    return float(times[i] + offset * spacing), float(value)


@dataclass(frozen=True)
class LogFit:
    """sigma_m ~ a ln N + b."""

    a: float
    b: float

    @classmethod
    def fit(cls, points: Sequence[Tuple[float, float]]) -> "LogFit":
        """
        Least squares in ln N.

        Raises:
            FitError: With fewer than three points or a single abscissa
        """
        data = np.asarray(points, dtype=float)
        if data.ndim != 2 or data.shape[0] < 3:
            raise FitError("a logarithmic fit needs at least three (N, sigma_m) points")
        if np.any(data[:, 0] <= 0):
            raise FitError("N must be positive")
        log_n = np.log(data[:, 0])
        if np.ptp(log_n) < 1e-12:
            raise FitError("all points share the same N")
        a, b = np.polyfit(log_n, data[:, 1], 1)
        return cls(a=float(a), b=float(b))

    def __call__(self, n: float) -> float:
        return self.a * math.log(n) + self.b

    def invert(self, sigma: float) -> float:
        """N with fit value sigma."""
        if self.a == 0:
            raise FitError("fit has zero slope and cannot be inverted")
        return math.exp((sigma - self.b) / self.a)


def n_eff_fit(points: Sequence[Tuple[float, float]]) -> LogFit:
    """sigma_m against the boson number N of unshifted runs, as a*ln(N) + b."""
    return LogFit.fit(points)


def sign_changes(
    times: NDArray,
    derivative: NDArray,
    band: float,
) -> NDArray[np.float64]:
    """Times at which the derivative crosses from one side of +-band to the other."""
    side = np.where(derivative > band, 1, np.where(derivative < -band, -1, 0))
    outside = np.flatnonzero(side)
    flips = np.flatnonzero(side[outside][1:] != side[outside][:-1])
    return times[outside[flips + 1]]


def classify_dynamics(
    trajectory: Any,
    values: Optional[Sequence[float]] = None,
    *,
    t_skip: float = DEFAULT_T_SKIP,
    n_osc: int = DEFAULT_N_OSC,
    hysteresis: float = DEFAULT_HYSTERESIS,
    cv_cutoff: float = DEFAULT_CV_CUTOFF,
) -> str:
    """
    Label <sigma_z(t)> as coherent, pseudo-coherent or undetermined.

    Sign changes of the centred-difference derivative are counted beyond
    ``t_skip`` with a hysteresis band of ``hysteresis`` times the largest
    |derivative|. At least ``n_osc`` changes make the dynamics oscillatory;
    it is pseudo-coherent when the spacing between changes has a
    coefficient of variation above ``cv_cutoff``.

    Raises:
        RecordTooShortError: If fewer than five samples lie beyond t_skip
    """
    times, sigma = _series(trajectory, values)
    if len(sigma) < 3:
        raise RecordTooShortError(f"need at least 3 samples, got {len(sigma)}")

    derivative = np.gradient(sigma, times)
    mask = times > t_skip
    if np.count_nonzero(mask) < 5:
        raise RecordTooShortError(f"fewer than 5 samples after t_skip={t_skip}")

    tail_times = times[mask]
    tail = derivative[mask]
    scale = float(np.max(np.abs(tail)))
    if scale == 0:
        return LABEL_UNDETERMINED

    changes = sign_changes(tail_times, tail, hysteresis * scale)
    if len(changes) < n_osc:
        return LABEL_UNDETERMINED

    spacings = np.diff(changes)
    cv = float(np.std(spacings) / np.mean(spacings))
    logger.debug("classifier: %d sign changes, spacing cv %.3f", len(changes), cv)
    return LABEL_PSEUDO_COHERENT if cv > cv_cutoff else LABEL_COHERENT


def analyze_trajectory(
    trajectory: Any,
    *,
    t_skip: float = DEFAULT_T_SKIP,
    n_osc: int = DEFAULT_N_OSC,
    hysteresis: float = DEFAULT_HYSTERESIS,
    cv_cutoff: float = DEFAULT_CV_CUTOFF,
    fit: Optional[LogFit] = None,
    occupations: Optional[ModeOccupations] = None,
    require_minimum: bool = True,
) -> TrajectoryAnalysis:
    """
    First minimum, label and optional N_eff / resonance peak of a trajectory.

    Raises:
        MinimumNotFoundError: If ``require_minimum`` and there is no minimum
    """
    try:
        t_s, sigma_m = first_local_minimum(trajectory)
    except MinimumNotFoundError:
        if require_minimum:
            raise
        t_s, sigma_m = None, None

    try:
        label = classify_dynamics(
            trajectory, t_skip=t_skip, n_osc=n_osc, hysteresis=hysteresis, cv_cutoff=cv_cutoff
        )
    except RecordTooShortError:
        logger.warning("Trajectory too short to classify beyond t_skip=%g", t_skip)
        label = LABEL_UNDETERMINED

    n_eff = fit.invert(sigma_m) if fit is not None and sigma_m is not None else None
    omega_peak = None
    if occupations is not None:
        try:
            omega_peak = resonance_peak(occupations)
        except NoPeakError:
            logger.warning("No resonance peak in the occupation profile")

    return TrajectoryAnalysis(
        t_s=t_s,
        sigma_m=sigma_m,
        label=label,
        n_eff=n_eff,
        omega_peak=omega_peak,
        extras={"t_skip": t_skip, "n_osc": n_osc, "hysteresis": hysteresis, "cv_cutoff": cv_cutoff},
    )
