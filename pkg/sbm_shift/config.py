"""
Configuration for spin-boson simulations.

Defines the parameter dataclasses shared by every module and the flat
run configuration read by the command-line driver.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from .validation import (
    ConfigError,
    ValidationError,
    VALID_RUN_KINDS,
    INTEGER_SWEEP_PARAMS,
    VALID_SHIFT_MODES,
    VALID_SWEEP_PARAMS,
    VALID_TROTTER_ORDERS,
    validate_beta,
    validate_choice,
    validate_int_range,
    validate_nonnegative,
    validate_positive,
)


# Default constants
DEFAULT_DELTA = 0.1
DEFAULT_BIAS = 0.0
DEFAULT_OMEGA_C = 1.0
DEFAULT_DT = 0.1
DEFAULT_CHAIN_LENGTH = 30
DEFAULT_FOCK_DIM = 6
DEFAULT_BOND_CAP = 64
DEFAULT_EPSILON = 0.1
DEFAULT_MU = 0.5
DEFAULT_WEIGHT_TOL = 1e-12
OUTPUT_DIR_ENV = "SBM_SHIFT_OUTPUT_DIR"


@dataclass(frozen=True)
class ModelParams:
    """
    Physical couplings, truncations and schedule of one simulation.

    Attributes:
        delta: Tunneling energy (units of omega_c)
        bias: Energy bias of the two-level system
        alpha: Dimensionless system-bath coupling (>= 0)
        s: Spectral exponent (> 0); s < 1 sub-Ohmic, s = 1 Ohmic, s > 1 super-Ohmic
        omega_c: Cutoff frequency (> 0)
        chain_length: Number of chain sites L including the spin (>= 2)
        fock_dim: Local boson truncation d (>= 2)
        obb_dim: Optimized boson basis size d_opt; None means d_opt = d
        bond_cap: Maximum MPS bond dimension D_c
        dt: Real-time step
        beta: Inverse temperature, ``math.inf`` for zero temperature
        mu: Bath polarization parameter of the thermal initial state
        order: Trotter-Suzuki order (1 or 2)
        epsilon: Scale of the extra boson shift applied before real-time runs
        weight_tol: Singular-value tail weight always dropped in truncations
        shift_mode: Shifted gate construction, 'substitute' or 'sandwich'
    """

    delta: float = DEFAULT_DELTA
    bias: float = DEFAULT_BIAS
    alpha: float = 0.1
    s: float = 1.0
    omega_c: float = DEFAULT_OMEGA_C
    chain_length: int = DEFAULT_CHAIN_LENGTH
    fock_dim: int = DEFAULT_FOCK_DIM
    obb_dim: Optional[int] = None
    bond_cap: int = DEFAULT_BOND_CAP
    dt: float = DEFAULT_DT
    beta: float = math.inf
    mu: float = DEFAULT_MU
    order: int = 2
    epsilon: float = DEFAULT_EPSILON
    weight_tol: float = DEFAULT_WEIGHT_TOL
    shift_mode: str = "substitute"

    def __post_init__(self) -> None:
        validate_nonnegative(self.alpha, "alpha")
        validate_positive(self.s, "s")
        validate_positive(self.omega_c, "omega_c")
        validate_positive(self.dt, "dt")
        validate_beta(self.beta)
        validate_nonnegative(self.epsilon, "epsilon")
        validate_nonnegative(self.weight_tol, "weight_tol")
        validate_int_range(self.chain_length, "chain_length", 2)
        validate_int_range(self.fock_dim, "fock_dim", 2)
        validate_int_range(self.bond_cap, "bond_cap", 1)
        if self.obb_dim is not None:
            # purified runs may keep up to d^2 optimized states
            validate_int_range(self.obb_dim, "obb_dim", 1, self.fock_dim ** 2)
        validate_choice(self.order, "Trotter order", VALID_TROTTER_ORDERS)
        validate_choice(self.shift_mode, "shift_mode", VALID_SHIFT_MODES)

    @property
    def d_opt(self) -> int:
        """Optimized basis size for pure-state runs."""
        d_opt = self.fock_dim if self.obb_dim is None else self.obb_dim
        if d_opt > self.fock_dim:
            raise ValidationError(
                f"obb_dim {d_opt} exceeds fock_dim {self.fock_dim} for a pure-state run"
            )
        return d_opt

    @property
    def thermal_d_opt(self) -> int:
        """Optimized basis size on the doubled (physical x ancilla) space."""
        return self.fock_dim ** 2 if self.obb_dim is None else self.obb_dim

    @property
    def num_bosons(self) -> int:
        return self.chain_length - 1

    def with_updates(self, **changes: Any) -> "ModelParams":
        """Return a copy with fields replaced (validated again)."""
        return replace(self, **changes)


@dataclass(frozen=True)
class ThermalParams:
    """
    Purified finite-temperature settings.

    Attributes:
        beta: Inverse temperature (finite, > 0)
        mu: Polarization strength of the initial bath
        d2: Purified local dimension, always fock_dim ** 2
        dtau: Imaginary-time step of the state preparation
    """

    beta: float
    mu: float
    d2: int
    dtau: float

    def __post_init__(self) -> None:
        validate_positive(self.beta, "beta")
        validate_positive(self.dtau, "dtau")
        validate_int_range(self.d2, "d2", 4)

    @classmethod
    def from_model(cls, params: ModelParams, dtau: Optional[float] = None) -> "ThermalParams":
        if math.isinf(params.beta):
            raise ValidationError("thermal runs need a finite beta")
        return cls(
            beta=params.beta,
            mu=params.mu,
            d2=params.fock_dim ** 2,
            dtau=params.dt / 5 if dtau is None else dtau,
        )


_MODEL_FIELDS = tuple(f.name for f in fields(ModelParams))


@dataclass
class RunConfig:
    """
    Flat run configuration: every ModelParams field plus run orchestration.

    Loaded from a single JSON file; CLI flags override keys one-to-one.
    """

    # model (mirrors ModelParams)
    delta: float = DEFAULT_DELTA
    bias: float = DEFAULT_BIAS
    alpha: float = 0.1
    s: float = 1.0
    omega_c: float = DEFAULT_OMEGA_C
    chain_length: int = DEFAULT_CHAIN_LENGTH
    fock_dim: int = DEFAULT_FOCK_DIM
    obb_dim: Optional[int] = None
    bond_cap: int = DEFAULT_BOND_CAP
    dt: float = DEFAULT_DT
    beta: float = math.inf
    mu: float = DEFAULT_MU
    order: int = 2
    epsilon: float = DEFAULT_EPSILON
    weight_tol: float = DEFAULT_WEIGHT_TOL
    shift_mode: str = "substitute"

    # orchestration
    kind: str = "evolve"
    output_dir: str = "runs"
    t_final: float = 50.0
    observe_every: int = 1
    snapshot_every: int = 10
    checkpoint_every: int = 0
    resume: bool = False
    shifted: bool = True
    trunc_budget: float = 1e-3
    seed: int = 1234
    workers: int = 1
    verbosity: int = 1
    trajectory_file: Optional[str] = None

    # classifier thresholds
    n_osc: int = 6
    hysteresis: float = 0.02
    cv_cutoff: float = 0.2
    t_skip: float = 20.0

    # scan grid
    scan_s: List[float] = field(default_factory=lambda: [3.0])
    scan_alpha: List[float] = field(default_factory=lambda: [1.0, 4.0])

    # convergence sweep of one truncation or shift setting; the last value is the reference
    sweep_param: str = "obb_dim"
    sweep_values: List[float] = field(default_factory=lambda: [3.0, 4.0, 6.0])

    # ground-state preparation
    dmrg_bond_dim: Optional[int] = None
    dmrg_noise: float = 1e-8
    max_sweeps: int = 200
    e_tol: float = 1e-10
    shift_tol: float = 1e-6
    shift_damping: float = 0.7
    max_shift_iterations: int = 100

    # finite temperature
    dtau: Optional[float] = None
    max_thermal_fock: int = 6
    thermal_shifted: bool = False
    thermal_check: bool = False

    def __post_init__(self) -> None:
        validate_choice(self.kind, "run kind", VALID_RUN_KINDS)
        validate_int_range(self.observe_every, "observe_every", 1)
        validate_int_range(self.snapshot_every, "snapshot_every", 0)
        validate_int_range(self.checkpoint_every, "checkpoint_every", 0)
        validate_int_range(self.workers, "workers", 1)
        validate_int_range(self.verbosity, "verbosity", 0, 2)
        validate_nonnegative(self.t_final, "t_final")
        validate_positive(self.trunc_budget, "trunc_budget")
        validate_nonnegative(self.dmrg_noise, "dmrg_noise")
        if self.dmrg_bond_dim is not None:
            validate_int_range(self.dmrg_bond_dim, "dmrg_bond_dim", 1)
        if not 0 < self.shift_damping <= 1:
            raise ValidationError(f"shift_damping must be in (0, 1], got {self.shift_damping}")
        self.scan_s = [float(v) for v in self.scan_s]
        self.scan_alpha = [float(v) for v in self.scan_alpha]
        validate_choice(self.sweep_param, "sweep parameter", VALID_SWEEP_PARAMS)
        self.sweep_values = [float(v) for v in self.sweep_values]
        if not self.sweep_values:
            raise ValidationError("sweep_values must not be empty")
        if len(set(self.sweep_values)) != len(self.sweep_values):
            raise ValidationError(f"sweep_values must be distinct, got {self.sweep_values}")
        if self.sweep_param in INTEGER_SWEEP_PARAMS and not all(v.is_integer() for v in self.sweep_values):
            raise ValidationError(f"{self.sweep_param} sweep needs integer values, got {self.sweep_values}")

    def model_params(self, **changes: Any) -> ModelParams:
        """Build the ModelParams view of this configuration."""
        values = {name: getattr(self, name) for name in _MODEL_FIELDS}
        values.update(changes)
        return ModelParams(**values)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        # JSON has no infinity literal
        if math.isinf(data["beta"]):
            data["beta"] = "inf"
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        """
        Build a configuration from a mapping.

        Raises:
            ConfigError: On unknown keys or values of the wrong type
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

        values = dict(data)
        if isinstance(values.get("beta"), str):
            try:
                values["beta"] = float(values["beta"])
            except ValueError as e:
                raise ConfigError(f"beta must be a number or 'inf': {e}")

        try:
            config = cls(**values)
            config.model_params()
        except ConfigError:
            raise
        except (ValidationError, TypeError) as e:
            raise ConfigError(str(e)) from e
        return config

    @classmethod
    def load(cls, path: Path | str) -> "RunConfig":
        """Read a JSON configuration file."""
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError("Config file must contain a JSON object")
        return cls.from_dict(data)

    def dump(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Return a copy with the given keys replaced."""
        data = self.to_dict()
        data.update(overrides)
        return RunConfig.from_dict(data)
