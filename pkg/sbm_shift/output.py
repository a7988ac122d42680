"""
Result file handling for different tables.

Supports:
- Trajectory CSV (t, sigma_z, norm, energy, trunc_err)
- Mode-occupation snapshots, bond entropies, shift tables, scan grids and sweeps (CSV)
- Analysis reports (JSON and one-row CSV)

Floats are written with 15 significant digits, so identical results give
byte-identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np
import pandas as pd

from .analysis import mode_occupations, sigma_z_derivative
from .model import ChainCoefficients, StarBath
from .shifts import ShiftRegister
from .tebd import TrajectoryRecord
from .validation import ValidationError, validate_input_path

FLOAT_FORMAT = "%.15g"
TRAJECTORY_COLUMNS = ["t", "sigma_z", "norm", "energy", "trunc_err"]
SNAPSHOT_COLUMNS = ["t", "omega_p", "n_p", "n_p_minus_n0"]
ENTROPY_COLUMNS = ["t", "bond", "entropy"]
SHIFT_COLUMNS = ["k", "x_k"]
SCAN_COLUMNS = ["s", "alpha", "t_s", "sigma_m", "label"]
SWEEP_COLUMNS = ["value", "t", "sigma_z", "trunc_err"]
SWEEP_SUMMARY_COLUMNS = [
    "parameter", "value", "seconds", "total_trunc_err", "shift_norm_loss", "complete", "max_deviation",
]
DERIVATIVE_COLUMNS = ["t", "sigma_z", "dsigma_z_dt"]
VALID_TABLE_FORMATS = frozenset(["csv", "json"])


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """
    Write a table as CSV.

    Args:
        frame: Table to write
        path: Output path

    Returns:
        Path to written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_json(data: Mapping[str, Any], path: Path) -> Path:
    """Write a mapping as JSON with sorted keys; NaN and inf become null."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clean = {key: _json_value(value) for key, value in data.items()}
    path.write_text(json.dumps(clean, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _json_value(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_table(data: Any, path: Path, format: Optional[str] = None) -> Path:
    """
    Write a table in the given format.

    Args:
        data: DataFrame (csv) or mapping (json)
        path: Output path
        format: 'csv' or 'json'. If None, inferred from path.

    Raises:
        ValidationError: If format is unknown
    """
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip('.').lower()

    if format == 'csv':
        frame = data if isinstance(data, pd.DataFrame) else pd.DataFrame([dict(data)])
        return write_csv(frame, path)
    elif format == 'json':
        return write_json(dict(data), path)
    else:
        raise ValidationError(
            f"Unknown table format: {format}. Valid options: {', '.join(sorted(VALID_TABLE_FORMATS))}"
        )


# -- trajectories ----------------------------------------------------------------

def trajectory_frame(record: TrajectoryRecord) -> pd.DataFrame:
    return pd.DataFrame(record.arrays(), columns=TRAJECTORY_COLUMNS)


def write_trajectory(record: TrajectoryRecord, path: Path) -> Path:
    """Write a trajectory CSV with header t,sigma_z,norm,energy,trunc_err."""
    return write_csv(trajectory_frame(record), path)


def read_trajectory(path: Path, until: Optional[float] = None) -> TrajectoryRecord:
    """
    Read a trajectory CSV.

    Args:
        path: CSV written by write_trajectory
        until: Drop rows later than this time (used when resuming)

    Raises:
        ValidationError: If the file is missing or lacks a column
    """
    path = validate_input_path(path, "Trajectory")
    frame = pd.read_csv(path)
    missing = [c for c in TRAJECTORY_COLUMNS if c not in frame.columns]
    if missing:
        raise ValidationError(f"Trajectory file {path} lacks columns: {', '.join(missing)}")
    if until is not None:
        frame = frame[frame["t"] <= until + 1e-12]

    record = TrajectoryRecord()
    for row in frame.itertuples(index=False):
        record.append(row.t, row.sigma_z, row.norm, row.energy, row.trunc_err)
    return record


# -- snapshots ---------------------------------------------------------------------

def snapshot_frame(
    record: TrajectoryRecord,
    chain: ChainCoefficients,
    reference: Optional[np.ndarray] = None,
    star: Optional[StarBath] = None,
) -> pd.DataFrame:
    """
    Star-mode occupations of every snapshot, one row per (t, mode).

    The reference defaults to the occupations of the first snapshot.
    """
    rows: List[Dict[str, float]] = []
    for snap in record.snapshots:
        occ = mode_occupations(snap.correlation, chain, star=star)
        if reference is None:
            reference = occ.n_p
        for omega, n_p, n0 in zip(occ.omega_p, occ.n_p, reference):
            rows.append({"t": snap.t, "omega_p": omega, "n_p": n_p, "n_p_minus_n0": n_p - n0})
    return pd.DataFrame(rows, columns=SNAPSHOT_COLUMNS)


def entropy_frame(record: TrajectoryRecord) -> pd.DataFrame:
    """Entanglement entropy across every bond of every snapshot, one row per (t, bond)."""
    rows = [
        {"t": snap.t, "bond": bond, "entropy": value}
        for snap in record.snapshots
        for bond, value in enumerate(snap.entropies)
    ]
    return pd.DataFrame(rows, columns=ENTROPY_COLUMNS)


def write_snapshots(frame: pd.DataFrame, path: Path, append_to: Optional[Path] = None) -> Path:
    """
    Write a per-time table (occupations or entropies).

    With ``append_to`` the rows of that earlier file before the first new
    time are kept in front.
    """
    if append_to is not None and Path(append_to).exists():
        earlier = pd.read_csv(append_to)
        if not frame.empty:
            earlier = earlier[earlier["t"] < frame["t"].min() - 1e-12]
        frame = pd.concat([earlier, frame], ignore_index=True)
    return write_csv(frame, path)


def read_snapshot_reference(path: Path) -> Optional[np.ndarray]:
    """Reference occupations n0 stored implicitly in the first snapshot of a file."""
    path = Path(path)
    if not path.exists():
        return None
    frame = pd.read_csv(path)
    if frame.empty:
        return None
    first = frame[frame["t"] == frame["t"].min()]
    return (first["n_p"] - first["n_p_minus_n0"]).to_numpy(float)


# -- shift tables and grids -------------------------------------------------------------

def write_shift_table(register: ShiftRegister, path: Path) -> Path:
    """Write `k,x_k` with boson sites numbered from 1."""
    frame = pd.DataFrame({
        "k": np.arange(1, len(register.shifts) + 1),
        "x_k": register.shifts,
    })
    return write_csv(frame, path)


def read_shift_table(path: Path, epsilon: float = 0.0, mode: str = "substitute") -> ShiftRegister:
    path = validate_input_path(path, "Shift table")
    frame = pd.read_csv(path)
    if list(frame.columns) != SHIFT_COLUMNS:
        raise ValidationError(f"Shift table {path} must have columns k,x_k")
    return ShiftRegister(shifts=frame.sort_values("k")["x_k"].to_numpy(float), epsilon=epsilon, mode=mode)


def write_scan(rows: Iterable[Mapping[str, Any]], path: Path) -> Path:
    """Write the scan grid, one labelled row per (s, alpha)."""
    return write_csv(pd.DataFrame(list(rows), columns=SCAN_COLUMNS), path)


def write_sweep(
    records: Mapping[float, TrajectoryRecord],
    summary: Iterable[Mapping[str, Any]],
    path: Path,
    summary_path: Path,
) -> List[Path]:
    """Write every swept trajectory in one long table plus the per-value summary."""
    frames = [
        pd.DataFrame({
            "value": value,
            "t": record.times,
            "sigma_z": record.sigma_z,
            "trunc_err": record.trunc_err,
        })
        for value, record in records.items()
    ]
    long = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=SWEEP_COLUMNS)
    return [
        write_csv(long[SWEEP_COLUMNS], path),
        write_csv(pd.DataFrame(list(summary), columns=SWEEP_SUMMARY_COLUMNS), summary_path),
    ]


def derivative_frame(record: TrajectoryRecord) -> pd.DataFrame:
    return pd.DataFrame(
        {"t": record.times, "sigma_z": record.sigma_z, "dsigma_z_dt": sigma_z_derivative(record)},
        columns=DERIVATIVE_COLUMNS,
    )


def write_report(report: Mapping[str, Any], json_path: Path, csv_path: Optional[Path] = None) -> List[Path]:
    """Write an analysis report as JSON and, optionally, a one-row CSV."""
    paths = [write_table(report, json_path, "json")]
    if csv_path is not None:
        row = {key: report[key] for key in sorted(report)}
        paths.append(write_table(row, csv_path, "csv"))
    return paths
