"""
Error taxonomy and input validation.

Provides:
- The exception hierarchy used across the package (and mapped to CLI exit codes)
- Bounds checks for model parameters and run settings
- File path checks for trajectory inputs and output directories
"""

from __future__ import annotations

from pathlib import Path
import math
from typing import Any, Iterable, Optional, Sequence

# Validation constants
MAX_DENSE_DIMENSION = 4096
VALID_RUN_KINDS = frozenset(['ground', 'evolve', 'thermal', 'scan', 'sweep', 'analyze'])
VALID_SWEEP_PARAMS = frozenset(['obb_dim', 'epsilon', 'fock_dim'])
INTEGER_SWEEP_PARAMS = frozenset(['obb_dim', 'fock_dim'])
VALID_SHIFT_MODES = frozenset(['substitute', 'sandwich'])
VALID_GATE_KINDS = frozenset(['real', 'imaginary'])
VALID_TROTTER_ORDERS = frozenset([1, 2])
MAX_TRAJECTORY_FILE_SIZE = 200 * 1024 * 1024  # 200MB


class SbmShiftError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(SbmShiftError, ValueError):
    """Raised when a parameter or argument is outside its domain."""
    pass


class ConfigError(ValidationError):
    """Raised for malformed run configurations (unknown keys, bad types)."""
    pass


class CheckpointError(SbmShiftError):
    """Raised when a checkpoint is missing or incompatible."""
    pass


class NumericalError(SbmShiftError, ArithmeticError):
    """Raised when a numerical kernel meets a degenerate or invalid input."""
    pass


class TruncationBudgetExceeded(NumericalError):
    """
    Raised when accumulated discarded weight exceeds the configured budget.

    The partial trajectory recorded up to the abort is kept on ``record``.
    """

    def __init__(self, message: str, record: Any = None) -> None:
        super().__init__(message)
        self.record = record


class AnalysisError(SbmShiftError):
    """Base class for failures of trajectory analysis."""
    pass


class MinimumNotFoundError(AnalysisError):
    """No local minimum in a trajectory."""
    pass


class NoPeakError(AnalysisError):
    """Flat occupation profile, no resonance peak."""
    pass


class FitError(AnalysisError):
    """Degenerate least-squares fit."""
    pass


class RecordTooShortError(AnalysisError):
    """Trajectory has too few samples for the requested analysis."""
    pass


class RootCountError(AnalysisError):
    """
    Raised when the self-consistency equation does not have two roots.

    The roots that were found are kept on ``roots``.
    """

    def __init__(self, message: str, roots: Sequence[float] = ()) -> None:
        super().__init__(message)
        self.roots = list(roots)


def validate_positive(value: float, name: str) -> float:
    """
    Validate a strictly positive finite number.

    Raises:
        ValidationError: If value is not a positive finite number
    """
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(f"{name} must be a number, got {type(value).__name__}")
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive, got {value}")
    return float(value)


def validate_nonnegative(value: float, name: str) -> float:
    """Validate a finite number >= 0."""
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(f"{name} must be a number, got {type(value).__name__}")
    if not math.isfinite(value) or value < 0:
        raise ValidationError(f"{name} must be >= 0, got {value}")
    return float(value)


def validate_int_range(
    value: int,
    name: str,
    minimum: int,
    maximum: Optional[int] = None,
) -> int:
    """
    Validate an integer inside [minimum, maximum].

    Raises:
        ValidationError: If value is not an integer or out of bounds
    """
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValidationError(f"{name} must be an integer, got {type(value).__name__}")

    if value < minimum or (maximum is not None and value > maximum):
        upper = "inf" if maximum is None else str(maximum)
        raise ValidationError(
            f"{name} must be between {minimum} and {upper}, got {value}"
        )

    return value


def validate_choice(value: Any, name: str, choices: Iterable[Any]) -> Any:
    """Validate membership in a fixed set of options."""
    choices = frozenset(choices)
    if value not in choices:
        raise ValidationError(
            f"Invalid {name} '{value}'. Valid options: "
            f"{', '.join(str(c) for c in sorted(choices, key=str))}"
        )
    return value


def validate_beta(beta: float) -> float:
    """
    Validate an inverse temperature in (0, inf].

    ``math.inf`` denotes zero temperature.
    """
    if not isinstance(beta, (int, float)) or isinstance(beta, bool):
        raise ValidationError(f"beta must be a number, got {type(beta).__name__}")
    if math.isnan(beta) or beta <= 0:
        raise ValidationError(f"beta must be in (0, inf], got {beta}")
    return float(beta)


def validate_site(site: int, num_sites: int) -> int:
    """Validate a chain site index."""
    if not isinstance(site, (int,)) or isinstance(site, bool):
        raise ValidationError(f"site must be an integer, got {type(site).__name__}")
    if site < 0 or site >= num_sites:
        raise ValidationError(f"site {site} out of range for a chain of {num_sites} sites")
    return site


def validate_dense_dimension(dim: int) -> int:
    """Validate the Hilbert-space dimension of a dense oracle."""
    if dim > MAX_DENSE_DIMENSION:
        raise ValidationError(
            f"Dense dimension {dim} exceeds the cap of {MAX_DENSE_DIMENSION}"
        )
    return dim


def validate_input_path(path: Path, purpose: str = "input") -> Path:
    """
    Validate an input file path.

    Args:
        path: Path to validate
        purpose: Description for error messages

    Returns:
        Validated absolute path

    Raises:
        ValidationError: If path is missing, not a file, or too large
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{purpose} file not found: {path}")

    if not path.is_file():
        raise ValidationError(f"{purpose} path is not a file: {path}")

    if path.stat().st_size > MAX_TRAJECTORY_FILE_SIZE:
        raise ValidationError(
            f"{purpose} file too large: {path.stat().st_size / 1024 / 1024:.1f}MB "
            f"(max {MAX_TRAJECTORY_FILE_SIZE / 1024 / 1024:.0f}MB)"
        )

    return path.resolve()


def validate_output_dir(path: Path, purpose: str = "output") -> Path:
    """
    Validate (and create) an output directory.

    Raises:
        ValidationError: If the path exists and is not a directory
    """
    resolved = Path(path).resolve()

    if resolved.exists() and not resolved.is_dir():
        raise ValidationError(f"{purpose} path is not a directory: {path}")

    resolved.mkdir(parents=True, exist_ok=True)
    return resolved
