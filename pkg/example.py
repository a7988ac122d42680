#!/usr/bin/env python3
"""
Example usage of the sbm_shift library.

This script runs a sub-Ohmic spin-boson model at several local boson
dimensions, with and without the shifted basis, and prints the first
minimum of <sigma_z(t)> for each run. A larger effective boson number
should push the minimum up (larger sigma_m) and earlier (smaller t_s).
"""

from pathlib import Path

from sbm_shift import RunConfig, SpinBosonSimulator, first_local_minimum
from sbm_shift.analysis import delta_r_zero_T
from sbm_shift.validation import AnalysisError

def main():
    # Output folder - will be created if it doesn't exist
    output_folder = Path("example_runs")
    output_folder.mkdir(exist_ok=True)

    # Runs to compare: same bath, different local spaces
    runs = [
        {"fock_dim": 3, "shifted": False, "name": "unshifted_d3"},
        {"fock_dim": 4, "shifted": False, "name": "unshifted_d4"},
        {"fock_dim": 6, "shifted": False, "name": "unshifted_d6"},
        {"fock_dim": 8, "shifted": False, "name": "unshifted_d8"},
        {"fock_dim": 6, "shifted": True, "name": "shifted_d6"},
    ]
    base = {"s": 0.25, "alpha": 0.03, "delta": 0.1, "chain_length": 30, "bond_cap": 32, "t_final": 120.0}

    print(f"[Info] Running {len(runs)} sub-Ohmic evolutions (s={base['s']}, alpha={base['alpha']})...")
    print(f"[Info] Output folder: {output_folder.absolute()}")
    print("-" * 50)

    results = []
    for i, run in enumerate(runs, 1):
        try:
            config = RunConfig(
                **base,
                fock_dim=run["fock_dim"],
                shifted=run["shifted"],
                snapshot_every=50,
                output_dir=str(output_folder / run["name"]),
            )
            print(f"[Event] {i}/{len(runs)}: Evolving '{run['name']}'...")
            print(f"[Info] d={run['fock_dim']}, shifted={run['shifted']}, bond cap={config.bond_cap}")

            result = SpinBosonSimulator(config).evolve()
            t_s, sigma_m = first_local_minimum(result.record)
            results.append((run["name"], t_s, sigma_m))
            print(f"[Success] t_s={t_s:.3f}, sigma_m={sigma_m:.4f} ({result.paths[-1]})")

        except AnalysisError as e:
            print(f"[Error] No minimum for '{run['name']}': {e}")
        except Exception as e:
            print(f"[Error] Failed to run '{run['name']}': {e}")

        print()

    print("[Info] Summary")
    for name, t_s, sigma_m in results:
        print(f"  {name:<14} t_s={t_s:8.3f}  sigma_m={sigma_m:8.4f}")

    # Ohmic reference for the resonance frequency of an s=1 run
    print(f"[Info] Zero-temperature renormalized tunneling (s=1, alpha=0.1): {delta_r_zero_T(0.1, 1.0, 0.1):.6f}")
    print("[Complete] Done! Check the example_runs folder for trajectories and snapshots.")

if __name__ == "__main__":
    main()
