"""
sbm_shift - Spin-boson dynamics with matrix product states.

This package simulates a two-level system coupled to a bosonic bath mapped
onto a chain. The bath is treated with an optimized boson basis in a
displaced (shifted) frame, which reaches far larger occupations than the
bare Fock truncation allows.

Example:
    >>> from sbm_shift import RunConfig, SpinBosonSimulator
    >>> config = RunConfig(alpha=0.1, s=1.0, t_final=50.0, output_dir="runs/ohmic")
    >>> result = SpinBosonSimulator(config).evolve()
    >>> result.record.sigma_z[-1]

Features:
    - Chain mapping of power-law spectral densities
    - TEBD in real and imaginary time with optimized, shifted boson bases
    - DMRG preparation of the polarized bath
    - Finite temperature by purification
    - Exact-diagonalization references for small chains
    - Trajectory analysis (first minimum, coherence classification)
"""

from .config import ModelParams, RunConfig, ThermalParams
from .factory import ModelFactory
from .simulator import RunResult, SpinBosonSimulator
from .model import ChainCoefficients, StarBath, chain_coefficients, chain_to_star, spectral_density
from .mps import MpsState, init_product_state
from .shifts import ShiftRegister, apply_epsilon_shift, shift_matrix
from .tebd import GateSet, TrajectoryRecord, evolve
from .dmrg import ground_state, polarized_bath_state, prepare_dynamics_initial
from .thermal import thermal_evolve, thermal_state
from .analysis import analyze_trajectory, classify_dynamics, first_local_minimum
from .validation import (
    AnalysisError,
    CheckpointError,
    ConfigError,
    NumericalError,
    SbmShiftError,
    TruncationBudgetExceeded,
    ValidationError,
)

__all__ = [
    # Main API
    "ModelParams",
    "RunConfig",
    "ThermalParams",
    "ModelFactory",
    "SpinBosonSimulator",
    "RunResult",
    # Building blocks
    "ChainCoefficients",
    "StarBath",
    "chain_coefficients",
    "chain_to_star",
    "spectral_density",
    "MpsState",
    "init_product_state",
    "ShiftRegister",
    "apply_epsilon_shift",
    "shift_matrix",
    "GateSet",
    "TrajectoryRecord",
    "evolve",
    "ground_state",
    "polarized_bath_state",
    "prepare_dynamics_initial",
    "thermal_state",
    "thermal_evolve",
    "analyze_trajectory",
    "classify_dynamics",
    "first_local_minimum",
    # Errors
    "SbmShiftError",
    "ValidationError",
    "ConfigError",
    "CheckpointError",
    "NumericalError",
    "TruncationBudgetExceeded",
    "AnalysisError",
]

__version__ = "0.1.0"
