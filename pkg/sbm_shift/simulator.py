"""
High-level simulation API.

Provides the SpinBosonSimulator class behind every command-line run:
ground-state preparation, real-time and thermal evolution, parameter
scans, convergence sweeps and trajectory analysis, each writing its
result files into the configured output directory.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from pathlib import Path
import time
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from .analysis import (
    TrajectoryAnalysis,
    analyze_trajectory,
    delta_r_finite_T,
    delta_r_zero_T,
)
from .config import RunConfig
from .dmrg import FROZEN_SPIN_SOURCE, polarized_bath_state, prepare_dynamics_initial
from .factory import ModelFactory
from .hamiltonian import bath_hamiltonian
from .mps import load_checkpoint, save_checkpoint
from .output import (
    derivative_frame,
    entropy_frame,
    read_shift_table,
    read_snapshot_reference,
    read_trajectory,
    snapshot_frame,
    write_json,
    write_report,
    write_scan,
    write_shift_table,
    write_snapshots,
    write_sweep,
    write_table,
    write_trajectory,
)
from .shifts import ShiftRegister
from .tebd import TrajectoryRecord, energy, evolve
from .thermal import thermal_evolve, thermal_state
from .validation import (
    CheckpointError,
    ConfigError,
    RootCountError,
    TruncationBudgetExceeded,
    INTEGER_SWEEP_PARAMS,
    validate_output_dir,
)

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
SNAPSHOT_FILE = "snapshots.csv"
OCCUPATION_FILE = "occupations.csv"
ENTROPY_FILE = "entanglement.csv"
SHIFT_FILE = "shifts.csv"
CHECKPOINT_FILE = "checkpoint.npz"
GROUND_FILE = "ground.npz"
GROUND_SUMMARY_FILE = "ground.json"
CONFIG_FILE = "config.json"
SCAN_FILE = "scan.csv"
REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"
SWEEP_FILE = "sweep.csv"
SWEEP_SUMMARY_FILE = "sweep_summary.csv"
DERIVATIVE_FILE = "derivative.csv"


@dataclass
class RunResult:
    """Files written by one run and the in-memory results behind them."""

    kind: str
    paths: List[Path] = field(default_factory=list)
    record: Optional[TrajectoryRecord] = None
    analysis: Optional[TrajectoryAnalysis] = None
    rows: List[Dict[str, Any]] = field(default_factory=list)


def _dmrg_options(config: RunConfig) -> Dict[str, Any]:
    return {
        "max_bond": config.dmrg_bond_dim,
        "noise": config.dmrg_noise,
        "max_sweeps": config.max_sweeps,
        "e_tol": config.e_tol,
        "shift_tol": config.shift_tol,
        "damping": config.shift_damping,
        "max_iterations": config.max_shift_iterations,
        "seed": config.seed,
    }


def _scan_point(data: Mapping[str, Any], s: float, alpha: float) -> Dict[str, Any]:
    """One scan grid point; module level so worker processes can pickle it."""
    config = RunConfig.from_dict(data).with_overrides({"s": s, "alpha": alpha})
    params = config.model_params()
    initial = prepare_dynamics_initial(params, shifted=config.shifted, **_dmrg_options(config))
    record = evolve(
        initial.state, initial.gates, initial.hamiltonian, config.t_final,
        max_bond=params.bond_cap,
        d_opt=params.d_opt,
        weight_tol=params.weight_tol,
        observe_every=config.observe_every,
        trunc_budget=config.trunc_budget,
    )
    analysis = analyze_trajectory(
        record,
        t_skip=config.t_skip,
        n_osc=config.n_osc,
        hysteresis=config.hysteresis,
        cv_cutoff=config.cv_cutoff,
        require_minimum=False,
    )
    logger.info("Scan point s=%g alpha=%g: %s", s, alpha, analysis.label)
    return {
        "s": s,
        "alpha": alpha,
        "t_s": math.nan if analysis.t_s is None else analysis.t_s,
        "sigma_m": math.nan if analysis.sigma_m is None else analysis.sigma_m,
        "label": analysis.label,
    }


def _sweep_point(data: Mapping[str, Any], name: str, value: float) -> Tuple[Dict[str, Any], TrajectoryRecord]:
    """One sweep value; module level so worker processes can pickle it."""
    config = RunConfig.from_dict(data).with_overrides({name: _sweep_value(name, value)})
    params = config.model_params()
    started = time.perf_counter()
    complete = True
    if math.isfinite(params.beta):
        bath = thermal_state(params, dtau=config.dtau)
        norm_loss = 0.0
        try:
            record = thermal_evolve(
                bath, params, config.t_final,
                max_thermal_fock=config.max_thermal_fock,
                shifted=config.thermal_shifted,
                observe_every=config.observe_every,
                trunc_budget=config.trunc_budget,
            )
        except TruncationBudgetExceeded as e:
            record, complete = e.record, False
    else:
        initial = prepare_dynamics_initial(params, shifted=config.shifted, **_dmrg_options(config))
        norm_loss = initial.state.shift_norm_loss
        try:
            record = evolve(
                initial.state, initial.gates, initial.hamiltonian, config.t_final,
                max_bond=params.bond_cap,
                d_opt=params.d_opt,
                weight_tol=params.weight_tol,
                observe_every=config.observe_every,
                trunc_budget=config.trunc_budget,
            )
        except TruncationBudgetExceeded as e:
            record, complete = e.record, False
    if not complete:
        logger.warning("Sweep %s=%g stopped at t=%g over the truncation budget", name, value, record.times[-1])

    seconds = time.perf_counter() - started
    logger.info("Sweep %s=%g done in %.1f s", name, value, seconds)
    summary = {
        "parameter": name,
        "value": value,
        "seconds": seconds,
        "total_trunc_err": record.total_trunc_err,
        "shift_norm_loss": norm_loss,
        "complete": complete,
    }
    return summary, record


def _sweep_value(name: str, value: float) -> Any:
    return int(value) if name in INTEGER_SWEEP_PARAMS else value


class SpinBosonSimulator:
    """
    Orchestrates runs of one RunConfig.

    Example:
        >>> config = RunConfig(alpha=0.1, s=1.0, t_final=20.0, output_dir="runs/ohmic")
        >>> simulator = SpinBosonSimulator(config)
        >>> result = simulator.evolve()
    """

    def __init__(
        self,
        config: Optional[RunConfig] = None,
        factory: Optional[ModelFactory] = None,
    ) -> None:
        """
        Initialize the simulator.

        Args:
            config: Run configuration. Uses defaults if None.
            factory: Custom model factory. Creates one if None.
        """
        self.config = config or RunConfig()
        self.params = self.config.model_params()
        self.factory = factory or ModelFactory(self.params)

    @property
    def output_dir(self) -> Path:
        return validate_output_dir(self.config.output_dir)

    def _path(self, name: str) -> Path:
        return self.output_dir / name

    def run(self) -> RunResult:
        """Dispatch on ``config.kind``."""
        handlers = {
            "ground": self.ground,
            "evolve": self.evolve,
            "thermal": self.thermal,
            "scan": self.scan,
            "sweep": self.sweep,
            "analyze": self.analyze,
        }
        return handlers[self.config.kind]()

    def _record_config(self) -> Path:
        return self.config.dump(self._path(CONFIG_FILE))

    def ground(self) -> RunResult:
        """
        Polarized bath ground state for the spin frozen up.

        Writes the bath checkpoint, its shift table and a summary with the
        energy in the final frame.
        """
        params = self.params
        bath, register = polarized_bath_state(
            params, shifted=self.config.shifted, **_dmrg_options(self.config)
        )
        chain = self.factory.chain()
        frame = register.shifts if np.any(register.shifts) else None
        hamiltonian = bath_hamiltonian(chain, params.fock_dim, frame, source=FROZEN_SPIN_SOURCE)
        bath_energy = energy(bath, hamiltonian)
        logger.info("Polarized bath energy %.10f", bath_energy)

        paths = [
            self._record_config(),
            save_checkpoint(self._path(GROUND_FILE), bath),
            write_shift_table(register, self._path(SHIFT_FILE)),
            write_json(
                {
                    "energy": bath_energy,
                    "max_abs_shift": float(np.max(np.abs(register.shifts), initial=0.0)),
                    "shifted": self.config.shifted,
                },
                self._path(GROUND_SUMMARY_FILE),
            ),
        ]
        return RunResult(kind="ground", paths=paths)

    def evolve(self) -> RunResult:
        """
        Real-time evolution of spin up times the polarized bath.

        With ``resume`` the run continues from the checkpoint and the rows of
        the existing trajectory up to the checkpoint time.

        Raises:
            CheckpointError: If resuming without a checkpoint
            TruncationBudgetExceeded: After writing the partial trajectory
        """
        config, params = self.config, self.params
        checkpoint = self._path(CHECKPOINT_FILE)
        trajectory_path = self._path(TRAJECTORY_FILE)
        snapshot_path = self._path(SNAPSHOT_FILE)
        paths = [self._record_config()]

        if config.resume:
            state, extras = load_checkpoint(checkpoint)
            t_start = float(extras.get("time", 0.0))
            record: Optional[TrajectoryRecord] = read_trajectory(trajectory_path, until=t_start)
            register = self._resume_register(state.shifts)
            gates, hamiltonian = self.factory.gates(register.site_shifts())
            reference = read_snapshot_reference(snapshot_path)
            logger.info("Resuming from t=%g", t_start)
        else:
            initial = prepare_dynamics_initial(params, shifted=config.shifted, **_dmrg_options(config))
            state, gates, hamiltonian = initial.state, initial.gates, initial.hamiltonian
            t_start, record, reference = 0.0, None, None
            paths.append(write_shift_table(initial.register, self._path(SHIFT_FILE)))

        try:
            record = evolve(
                state, gates, hamiltonian, config.t_final,
                max_bond=params.bond_cap,
                d_opt=params.d_opt,
                weight_tol=params.weight_tol,
                observe_every=config.observe_every,
                snapshot_every=config.snapshot_every,
                trunc_budget=config.trunc_budget,
                checkpoint_every=config.checkpoint_every,
                checkpoint_path=checkpoint,
                t_start=t_start,
                record=record,
            )
        except TruncationBudgetExceeded as e:
            write_trajectory(e.record, trajectory_path)
            logger.error("Partial trajectory written to %s", trajectory_path)
            raise

        paths.append(write_trajectory(record, trajectory_path))
        if config.snapshot_every and record.snapshots:
            table = snapshot_frame(record, self.factory.chain(), reference, star=self.factory.star())
            append_to = snapshot_path if config.resume else None
            paths.append(write_snapshots(table, snapshot_path, append_to=append_to))
            entropy_path = self._path(ENTROPY_FILE)
            paths.append(write_snapshots(
                entropy_frame(record), entropy_path, append_to=entropy_path if config.resume else None,
            ))
        return RunResult(kind="evolve", paths=paths, record=record)

    def _resume_register(self, frame: np.ndarray) -> ShiftRegister:
        """
        Shift register of the run being resumed, read from its shift table.

        Raises:
            CheckpointError: If the table is missing or disagrees with the
                frame stored in the checkpoint
        """
        path = self._path(SHIFT_FILE)
        if not path.exists():
            raise CheckpointError(f"Cannot resume: shift table not found: {path}")
        register = read_shift_table(path, epsilon=self.params.epsilon, mode=self.params.shift_mode)
        if register.site_shifts().shape != frame.shape or not np.allclose(
            register.site_shifts(), frame, rtol=1e-12, atol=1e-12
        ):
            raise CheckpointError(f"Shift table {path} does not match the checkpoint frame")
        return register

    def thermal(self) -> RunResult:
        """
        Evolution from a purified thermal bath at the configured beta and mu.

        Occupations are written relative to the initial thermal distribution.

        Raises:
            ConfigError: If beta is infinite or resume is requested
        """
        config, params = self.config, self.params
        if math.isinf(params.beta):
            raise ConfigError("thermal runs need a finite beta")
        if config.resume:
            raise ConfigError("resume is only supported for evolve runs")

        paths = [self._record_config()]
        bath = thermal_state(params, dtau=config.dtau, check_convergence=config.thermal_check)
        try:
            record = thermal_evolve(
                bath, params, config.t_final,
                max_thermal_fock=config.max_thermal_fock,
                shifted=config.thermal_shifted,
                observe_every=config.observe_every,
                snapshot_every=config.snapshot_every,
                trunc_budget=config.trunc_budget,
                checkpoint_every=config.checkpoint_every,
                checkpoint_path=self._path(CHECKPOINT_FILE),
            )
        except TruncationBudgetExceeded as e:
            write_trajectory(e.record, self._path(TRAJECTORY_FILE))
            raise

        paths.append(write_trajectory(record, self._path(TRAJECTORY_FILE)))
        if record.snapshots:
            table = snapshot_frame(record, self.factory.chain(), star=self.factory.star())
            paths.append(write_snapshots(table, self._path(OCCUPATION_FILE)))
            paths.append(write_snapshots(entropy_frame(record), self._path(ENTROPY_FILE)))
        return RunResult(kind="thermal", paths=paths, record=record)

    def scan(self) -> RunResult:
        """
        Evolve and classify every (s, alpha) of the grid.

        Rows keep grid order (s outer, alpha inner) whatever the number of
        workers.
        """
        config = self.config
        points: List[Tuple[float, float]] = [(s, a) for s in config.scan_s for a in config.scan_alpha]
        data = config.to_dict()
        logger.info("Scanning %d grid points with %d worker(s)", len(points), config.workers)

        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_scan_point, data, s, a) for s, a in points]
                rows = [future.result() for future in futures]
        else:
            rows = [_scan_point(data, s, a) for s, a in points]

        paths = [self._record_config(), write_scan(rows, self._path(SCAN_FILE))]
        return RunResult(kind="scan", paths=paths, rows=rows)

    def sweep(self) -> RunResult:
        """
        Evolve once per value of ``sweep_param`` and compare to the last value.

        Zero-temperature runs start from the polarized bath, finite beta
        runs from the purified thermal bath. ``max_deviation`` is the largest
        |<sigma_z>| difference to the reference run over their common times.
        A run that passes the truncation budget is kept up to that point.

        Raises:
            ConfigError: If a swept value is invalid for the model
        """
        config = self.config
        name, values = config.sweep_param, config.sweep_values
        for value in values:
            params = config.with_overrides({name: _sweep_value(name, value)}).model_params()
            if math.isinf(params.beta) and params.obb_dim is not None and params.obb_dim > params.fock_dim:
                raise ConfigError(
                    f"obb_dim {params.obb_dim} exceeds fock_dim {params.fock_dim} for a pure-state run"
                )
        data = config.to_dict()
        logger.info("Sweeping %s over %s with %d worker(s)", name, values, config.workers)

        if config.workers > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(_sweep_point, data, name, v) for v in values]
                results = [future.result() for future in futures]
        else:
            results = [_sweep_point(data, name, v) for v in values]

        reference = results[-1][1]
        rows = []
        for summary, record in results:
            common = min(len(record), len(reference))
            gap = np.abs(np.asarray(record.sigma_z[:common]) - np.asarray(reference.sigma_z[:common]))
            rows.append({**summary, "max_deviation": float(np.max(gap, initial=0.0))})

        records = {summary["value"]: record for summary, record in results}
        paths = [
            self._record_config(),
            *write_sweep(records, rows, self._path(SWEEP_FILE), self._path(SWEEP_SUMMARY_FILE)),
        ]
        return RunResult(kind="sweep", paths=paths, rows=rows)

    def analyze(self) -> RunResult:
        """
        Analysis report of an existing trajectory CSV.

        Raises:
            ConfigError: If no trajectory_file is configured
            MinimumNotFoundError: If the trajectory has no local minimum
        """
        config, params = self.config, self.params
        if config.trajectory_file is None:
            raise ConfigError("analyze needs trajectory_file")

        record = read_trajectory(Path(config.trajectory_file))
        analysis = analyze_trajectory(
            record,
            t_skip=config.t_skip,
            n_osc=config.n_osc,
            hysteresis=config.hysteresis,
            cv_cutoff=config.cv_cutoff,
        )

        report = analysis.to_dict()
        report["delta_r_zero_T"] = (
            delta_r_zero_T(params.delta, params.omega_c, params.alpha)
            if params.alpha < 1 and params.delta > 0
            else None
        )
        report["delta_r_finite_T_low"] = report["delta_r_finite_T_high"] = None
        if math.isfinite(params.beta) and params.alpha > 0 and params.delta > 0:
            try:
                low, high = delta_r_finite_T(params.delta, params.omega_c, params.alpha, params.beta)
                report["delta_r_finite_T_low"], report["delta_r_finite_T_high"] = low, high
            except RootCountError as e:
                logger.warning("%s (roots: %s)", e, e.roots)

        paths = write_report(report, self._path(REPORT_JSON), self._path(REPORT_CSV))
        paths.append(write_table(derivative_frame(record), self._path(DERIVATIVE_FILE), "csv"))
        return RunResult(kind="analyze", paths=paths, analysis=analysis)
