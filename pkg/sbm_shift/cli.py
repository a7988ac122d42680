"""
Command-line interface for spin-boson simulations.

Provides the main CLI functionality including:
- Argument parsing (one subcommand per run kind, one flag per config key)
- Merging the JSON config file, the environment and the flags
- Logging setup and run summaries
"""

import argparse
from dataclasses import MISSING, fields
import logging
import os
from pathlib import Path
import sys
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from .config import OUTPUT_DIR_ENV, RunConfig
from .simulator import RunResult, SpinBosonSimulator
from .validation import validate_output_dir

LOG_FILE = "run.log"
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
VERBOSITY_LEVELS = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}

COMMANDS = {
    "ground": "Polarized bath ground state for the spin frozen up",
    "evolve": "Real-time evolution from the polarized bath",
    "thermal": "Real-time evolution from a purified thermal bath",
    "scan": "Evolve and classify a grid of (s, alpha)",
    "sweep": "Convergence sweep of obb_dim, epsilon or fock_dim",
    "analyze": "Analyze an existing trajectory CSV",
}


def _flag_type(annotation: Any) -> Dict[str, Any]:
    """argparse keyword arguments for a RunConfig field annotation."""
    if get_origin(annotation) is Union:
        inner = [arg for arg in get_args(annotation) if arg is not type(None)]
        annotation = inner[0]
    if annotation is bool:
        return {"action": argparse.BooleanOptionalAction}
    if get_origin(annotation) in (list, List):
        (item,) = get_args(annotation)
        return {"type": item, "nargs": "+"}
    return {"type": annotation}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    hints = get_type_hints(RunConfig)
    group = parser.add_argument_group("config overrides")
    for f in fields(RunConfig):
        if f.name == "kind":
            continue
        if f.default is not MISSING:
            default = f.default
        else:
            default = f.default_factory()
        group.add_argument(
            f"--{f.name.replace('_', '-')}",
            dest=f.name,
            default=argparse.SUPPRESS,
            help=f"(default: {default})",
            **_flag_type(hints[f.name]),
        )


def create_parser() -> argparse.ArgumentParser:
    """
    Create the argument parser for the CLI.

    Returns:
        Configured ArgumentParser
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", "-c",
        type=Path,
        help="JSON run configuration (flags override its keys)",
    )
    _add_config_flags(common)

    parser = argparse.ArgumentParser(
        prog="sbm-shift",
        description="Spin-boson dynamics with matrix product states in a shifted boson basis",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Examples:
  %(prog)s ground --alpha 0.1 --s 1 --chain-length 30 --fock-dim 6
  %(prog)s evolve --config run.json --t-final 100
  %(prog)s evolve --config run.json --t-final 200 --resume
  %(prog)s scan --scan-s 3 --scan-alpha 1 4 --workers 2
  %(prog)s sweep --sweep-param epsilon --sweep-values 0 0.1 0.5 1.5 --fock-dim 10 --obb-dim 8
  %(prog)s analyze --trajectory-file runs/trajectory.csv

The environment variable {OUTPUT_DIR_ENV} overrides output_dir of the
config file; --output-dir overrides both.
        """,
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def build_config(args: argparse.Namespace, environ: Optional[Dict[str, str]] = None) -> RunConfig:
    """
    Merge config file, environment and flags into one RunConfig.

    Raises:
        ConfigError: On unreadable files, unknown keys or invalid values
    """
    environ = os.environ if environ is None else environ
    config = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()

    overrides: Dict[str, Any] = {"kind": args.command}
    if environ.get(OUTPUT_DIR_ENV):
        overrides["output_dir"] = environ[OUTPUT_DIR_ENV]
    names = {f.name for f in fields(RunConfig)}
    overrides.update({key: value for key, value in vars(args).items() if key in names and key != "kind"})
    return config.with_overrides(overrides)


def configure_logging(config: RunConfig) -> Path:
    """Log to stderr and to run.log in the output directory."""
    log_path = validate_output_dir(config.output_dir) / LOG_FILE
    logging.basicConfig(
        level=VERBOSITY_LEVELS[config.verbosity],
        format=LOG_FORMAT,
        handlers=[logging.StreamHandler(sys.stderr), logging.FileHandler(log_path, encoding="utf-8")],
        force=True,
    )
    return log_path


def print_run_info(config: RunConfig, verbose: bool = False) -> None:
    """Print information about the run."""
    print(f"Running {config.kind}: s={config.s:g}, alpha={config.alpha:g}, delta={config.delta:g}")

    if verbose:
        print(f"  Chain length: {config.chain_length}")
        print(f"  Fock dimension: {config.fock_dim} (optimized: {config.obb_dim or config.fock_dim})")
        print(f"  Bond cap: {config.bond_cap}")
        print(f"  Time step: {config.dt:g} (order {config.order})")
        print(f"  Shifted basis: {config.shifted}")
        print(f"  Output: {config.output_dir}")


def _report(result: RunResult) -> RunResult:
    for path in result.paths:
        print(f"[OK] Wrote {path}")
    return result


def cmd_ground(config: RunConfig) -> RunResult:
    return _report(SpinBosonSimulator(config).ground())


def cmd_evolve(config: RunConfig) -> RunResult:
    return _report(SpinBosonSimulator(config).evolve())


def cmd_thermal(config: RunConfig) -> RunResult:
    return _report(SpinBosonSimulator(config).thermal())


def cmd_scan(config: RunConfig) -> RunResult:
    result = _report(SpinBosonSimulator(config).scan())
    for row in result.rows:
        print(f"  s={row['s']:g} alpha={row['alpha']:g}: {row['label']}")
    return result


def cmd_sweep(config: RunConfig) -> RunResult:
    result = _report(SpinBosonSimulator(config).sweep())
    for row in result.rows:
        print(
            f"  {row['parameter']}={row['value']:g}: max deviation {row['max_deviation']:.3g}, "
            f"discarded {row['total_trunc_err']:.3g}, {row['seconds']:.1f} s"
        )
    return result


def cmd_analyze(config: RunConfig) -> RunResult:
    result = _report(SpinBosonSimulator(config).analyze())
    analysis = result.analysis
    print(f"  t_s={analysis.t_s:.6g}, sigma_m={analysis.sigma_m:.6g}, label={analysis.label}")
    return result


COMMAND_HANDLERS = {
    "ground": cmd_ground,
    "evolve": cmd_evolve,
    "thermal": cmd_thermal,
    "scan": cmd_scan,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
}
