import json
import logging

import numpy as np
import pandas as pd
import pytest

from app import EXIT_ANALYSIS, EXIT_CONFIG, EXIT_OK, EXIT_TRUNCATION, main
from sbm_shift.cli import build_config, create_parser
from sbm_shift.config import OUTPUT_DIR_ENV, RunConfig
from sbm_shift.output import write_trajectory
from sbm_shift.simulator import SpinBosonSimulator

SMALL_RUN = ["--chain-length", "3", "--fock-dim", "4", "--alpha", "0.1", "--snapshot-every", "0"]


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    root = logging.getLogger()
    handlers = list(root.handlers)
    yield
    for handler in root.handlers:
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()


class TestParser:
    def test_flags_map_to_config_keys(self):
        args = create_parser().parse_args(
            ["evolve", "--alpha", "0.2", "--no-shifted", "--scan-alpha", "1", "2", "--obb-dim", "3"]
        )
        assert args.command == "evolve"
        assert args.alpha == 0.2
        assert args.shifted is False
        assert args.scan_alpha == [1.0, 2.0]
        assert args.obb_dim == 3
        assert not hasattr(args, "delta")

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            create_parser().parse_args([])

    def test_precedence(self, tmp_path):
        path = RunConfig(alpha=0.3, delta=0.2, output_dir="from-file").dump(tmp_path / "run.json")
        parser = create_parser()

        args = parser.parse_args(["ground", "--config", str(path), "--alpha", "0.4"])
        config = build_config(args, environ={OUTPUT_DIR_ENV: "from-env"})
        assert config.kind == "ground"
        assert config.alpha == 0.4
        assert config.delta == 0.2
        assert config.output_dir == "from-env"

        args = parser.parse_args(["ground", "--config", str(path), "--output-dir", "from-flag"])
        assert build_config(args, environ={OUTPUT_DIR_ENV: "from-env"}).output_dir == "from-flag"
        assert build_config(args, environ={}).output_dir == "from-flag"


class TestExitCodes:
    def test_analyze_cosine(self, cosine_record, tmp_path, capsys):
        path = write_trajectory(cosine_record, tmp_path / "trajectory.csv")
        out = tmp_path / "report"
        code = main(["analyze", "--trajectory-file", str(path), "--output-dir", str(out)])
        assert code == EXIT_OK
        assert "label=coherent" in capsys.readouterr().out
        report = json.loads((out / "report.json").read_text())
        assert report["label"] == "coherent"
        assert report["delta_r_zero_T"] == pytest.approx(0.0774264, abs=1e-6)
        assert report["delta_r_finite_T_low"] is None
        assert (out / "run.log").exists()
        derivative = pd.read_csv(out / "derivative.csv")
        assert list(derivative.columns) == ["t", "sigma_z", "dsigma_z_dt"]
        assert len(derivative) == len(cosine_record)

    def test_analyze_without_minimum(self, record_from, tmp_path, capsys):
        times = np.arange(0, 50, 0.1)
        path = write_trajectory(record_from(times, np.exp(-times / 10)), tmp_path / "trajectory.csv")
        code = main(["analyze", "--trajectory-file", str(path), "--output-dir", str(tmp_path / "out")])
        assert code == EXIT_ANALYSIS
        assert "[ERROR]" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["evolve", "--config", str(tmp_path / "none.json")]) == EXIT_CONFIG

    def test_analyze_needs_a_file(self, tmp_path):
        assert main(["analyze", "--output-dir", str(tmp_path)]) == EXIT_CONFIG

    def test_resume_without_checkpoint(self, tmp_path):
        code = main(["evolve", *SMALL_RUN, "--resume", "--output-dir", str(tmp_path / "run")])
        assert code == EXIT_CONFIG

    def test_truncation_budget(self, tmp_path):
        out = tmp_path / "run"
        code = main([
            "evolve", "--chain-length", "3", "--fock-dim", "3", "--alpha", "0.5", "--delta", "0.5",
            "--bond-cap", "1", "--trunc-budget", "1e-14", "--t-final", "1",
            "--snapshot-every", "0", "--output-dir", str(out),
        ])
        assert code == EXIT_TRUNCATION
        partial = pd.read_csv(out / "trajectory.csv")
        assert partial["t"].iloc[-1] < 1.0


class TestRuns:
    def test_free_spin_evolution(self, run_config):
        result = SpinBosonSimulator(run_config).evolve()
        frame = pd.read_csv(result.paths[-1])
        assert list(frame.columns) == ["t", "sigma_z", "norm", "energy", "trunc_err"]
        assert len(frame) == 101
        np.testing.assert_allclose(frame["sigma_z"], np.cos(0.1 * frame["t"]), atol=1e-6)

    def test_free_spin_from_the_command_line(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main([
            "evolve", "--alpha", "0", "--chain-length", "2", "--fock-dim", "2",
            "--t-final", "10", "--snapshot-every", "0", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        assert "[OK] Wrote" in capsys.readouterr().out
        frame = pd.read_csv(out / "trajectory.csv")
        np.testing.assert_allclose(frame["sigma_z"], np.cos(0.1 * frame["t"]), atol=1e-6)
        saved = RunConfig.load(out / "config.json")
        assert saved.alpha == 0.0 and saved.kind == "evolve"

    def test_ground(self, tmp_path):
        out = tmp_path / "ground"
        assert main(["ground", "--chain-length", "2", "--fock-dim", "20", "--output-dir", str(out)]) == EXIT_OK
        shifts = pd.read_csv(out / "shifts.csv")
        assert list(shifts.columns) == ["k", "x_k"]
        assert shifts["x_k"].iloc[0] == pytest.approx(-0.335410, abs=1e-5)
        summary = json.loads((out / "ground.json").read_text())
        assert summary["shifted"] is True
        assert (out / "ground.npz").exists()

    def test_identical_configs_give_identical_files(self, tmp_path):
        for name in ("a", "b"):
            assert main(["evolve", *SMALL_RUN, "--t-final", "2", "--output-dir", str(tmp_path / name)]) == EXIT_OK
        for table in ("trajectory.csv", "shifts.csv"):
            assert (tmp_path / "a" / table).read_bytes() == (tmp_path / "b" / table).read_bytes()

    def test_resume_matches_direct_run(self, tmp_path):
        direct, split = tmp_path / "direct", tmp_path / "split"
        assert main(["evolve", *SMALL_RUN, "--t-final", "2", "--output-dir", str(direct)]) == EXIT_OK
        first = ["evolve", *SMALL_RUN, "--checkpoint-every", "10", "--output-dir", str(split)]
        assert main([*first, "--t-final", "1"]) == EXIT_OK
        assert main([*first, "--t-final", "2", "--resume"]) == EXIT_OK

        expected = pd.read_csv(direct / "trajectory.csv")
        resumed = pd.read_csv(split / "trajectory.csv")
        assert len(resumed) == len(expected) == 21
        np.testing.assert_allclose(resumed.to_numpy(), expected.to_numpy(), atol=1e-10)

    def test_resume_with_a_foreign_shift_table(self, tmp_path):
        out = tmp_path / "run"
        first = ["evolve", *SMALL_RUN, "--checkpoint-every", "10", "--output-dir", str(out)]
        assert main([*first, "--t-final", "1"]) == EXIT_OK
        shifts = pd.read_csv(out / "shifts.csv")
        shifts["x_k"] += 0.5
        shifts.to_csv(out / "shifts.csv", index=False)
        assert main([*first, "--t-final", "2", "--resume"]) == EXIT_CONFIG

    def test_snapshots_write_bond_entropies(self, tmp_path):
        out = tmp_path / "run"
        code = main([
            "evolve", "--chain-length", "3", "--fock-dim", "4", "--alpha", "0.1",
            "--t-final", "1", "--snapshot-every", "5", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        entropies = pd.read_csv(out / "entanglement.csv")
        assert list(entropies.columns) == ["t", "bond", "entropy"]
        assert sorted(entropies["t"].unique()) == pytest.approx([0.0, 0.5, 1.0])
        assert sorted(entropies["bond"].unique()) == [0, 1]
        assert (entropies["entropy"] >= -1e-12).all()

    def test_thermal(self, tmp_path):
        out = tmp_path / "thermal"
        code = main([
            "thermal", "--chain-length", "3", "--fock-dim", "2", "--beta", "1", "--delta", "0",
            "--t-final", "1", "--snapshot-every", "5", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        frame = pd.read_csv(out / "trajectory.csv")
        np.testing.assert_allclose(frame["sigma_z"], 1.0, atol=1e-8)
        occupations = pd.read_csv(out / "occupations.csv")
        assert sorted(occupations["t"].unique()) == pytest.approx([0.0, 0.5, 1.0])

    def test_epsilon_sweep(self, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main([
            "sweep", *SMALL_RUN, "--t-final", "2", "--sweep-param", "epsilon",
            "--sweep-values", "0", "0.2", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        assert "epsilon=0.2: max deviation 0" in capsys.readouterr().out
        summary = pd.read_csv(out / "sweep_summary.csv")
        assert list(summary["value"]) == [0.0, 0.2]
        assert summary["shift_norm_loss"].iloc[0] == 0.0
        assert summary["complete"].all()
        assert summary["max_deviation"].iloc[-1] == 0.0
        assert summary["max_deviation"].iloc[0] < 1e-2
        trajectories = pd.read_csv(out / "sweep.csv")
        assert list(trajectories.columns) == ["value", "t", "sigma_z", "trunc_err"]
        assert len(trajectories) == 2 * 21

    def test_obb_sweep_at_finite_temperature(self, tmp_path):
        out = tmp_path / "sweep"
        code = main([
            "sweep", "--chain-length", "3", "--fock-dim", "2", "--beta", "1", "--t-final", "1",
            "--sweep-param", "obb_dim", "--sweep-values", "2", "4", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        summary = pd.read_csv(out / "sweep_summary.csv")
        assert list(summary["value"]) == [2.0, 4.0]
        assert (summary["total_trunc_err"] >= 0).all()

    def test_obb_sweep_beyond_the_fock_space(self, tmp_path):
        code = main([
            "sweep", *SMALL_RUN, "--sweep-param", "obb_dim", "--sweep-values", "2", "5",
            "--output-dir", str(tmp_path / "sweep"),
        ])
        assert code == EXIT_CONFIG

    def test_thermal_needs_finite_beta(self, tmp_path):
        assert main(["thermal", *SMALL_RUN, "--output-dir", str(tmp_path)]) == EXIT_CONFIG

    def test_scan_keeps_grid_order(self, tmp_path):
        base = [
            "scan", "--chain-length", "2", "--fock-dim", "3", "--t-final", "5",
            "--scan-s", "1", "0.5", "--scan-alpha", "0", "0.05",
        ]
        frames = []
        for workers in ("1", "2"):
            out = tmp_path / f"workers-{workers}"
            assert main([*base, "--workers", workers, "--output-dir", str(out)]) == EXIT_OK
            frames.append(pd.read_csv(out / "scan.csv"))
        serial, parallel = frames
        assert list(serial["s"]) == [1.0, 1.0, 0.5, 0.5]
        assert list(serial["alpha"]) == [0.0, 0.05, 0.0, 0.05]
        assert list(serial["label"]) == ["undetermined"] * 4
        pd.testing.assert_frame_equal(serial, parallel)


@pytest.mark.slow
def test_super_ohmic_scan(tmp_path):
    out = tmp_path / "scan"
    code = main([
        "scan", "--scan-s", "3", "--scan-alpha", "1", "4", "--chain-length", "30",
        "--fock-dim", "6", "--t-final", "150", "--workers", "2", "--output-dir", str(out),
    ])
    assert code == EXIT_OK
    frame = pd.read_csv(out / "scan.csv")
    assert list(frame["label"]) == ["coherent", "pseudo-coherent"]
