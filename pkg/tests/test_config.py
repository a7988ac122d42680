import json
import math

import pytest

from sbm_shift.config import ModelParams, RunConfig, ThermalParams
from sbm_shift.validation import ConfigError, ValidationError


class TestModelParams:
    def test_defaults(self):
        params = ModelParams()
        assert params.d_opt == params.fock_dim
        assert params.thermal_d_opt == params.fock_dim ** 2
        assert params.num_bosons == params.chain_length - 1
        assert math.isinf(params.beta)

    def test_obb_dim(self):
        assert ModelParams(fock_dim=6, obb_dim=4).d_opt == 4
        # allowed for purified runs only
        params = ModelParams(fock_dim=4, obb_dim=10)
        assert params.thermal_d_opt == 10
        with pytest.raises(ValidationError, match="exceeds fock_dim"):
            params.d_opt

    @pytest.mark.parametrize(
        "changes",
        [{"s": 0.0}, {"alpha": -0.1}, {"fock_dim": 1}, {"order": 3}, {"shift_mode": "other"}, {"beta": -1.0}],
    )
    def test_invalid(self, changes):
        with pytest.raises(ValidationError):
            ModelParams(**changes)

    def test_with_updates_revalidates(self):
        params = ModelParams()
        assert params.with_updates(alpha=0.2).alpha == 0.2
        with pytest.raises(ValidationError):
            params.with_updates(dt=0.0)


class TestThermalParams:
    def test_from_model(self):
        thermal = ThermalParams.from_model(ModelParams(beta=2.0, fock_dim=4, dt=0.1))
        assert thermal.d2 == 16
        assert thermal.dtau == pytest.approx(0.02)
        assert thermal.mu == 0.5

    def test_zero_temperature_rejected(self):
        with pytest.raises(ValidationError, match="finite beta"):
            ThermalParams.from_model(ModelParams())


class TestRunConfig:
    def test_round_trip(self):
        config = RunConfig(alpha=0.03, s=0.25, beta=2.0, scan_alpha=[1, 4], obb_dim=3)
        assert RunConfig.from_dict(config.to_dict()) == config

    def test_infinite_beta_serialized(self):
        data = RunConfig().to_dict()
        assert data["beta"] == "inf"
        assert math.isinf(RunConfig.from_dict(data).beta)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="Unknown config keys: colour"):
            RunConfig.from_dict({"colour": "blue"})

    def test_invalid_model_value_is_config_error(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"s": -1.0})

    def test_invalid_run_value(self):
        with pytest.raises(ValidationError):
            RunConfig(kind="plot")
        with pytest.raises(ValidationError, match="shift_damping"):
            RunConfig(shift_damping=0.0)
        with pytest.raises(ValidationError, match="integer"):
            RunConfig(sweep_param="obb_dim", sweep_values=[3, 4.5])
        with pytest.raises(ValidationError, match="distinct"):
            RunConfig(sweep_param="epsilon", sweep_values=[0.1, 0.1])
        with pytest.raises(ValidationError, match="sweep parameter"):
            RunConfig(sweep_param="dt")

    def test_dump_and_load(self, tmp_path):
        config = RunConfig(alpha=0.5, t_final=12.5, trajectory_file="x.csv")
        path = config.dump(tmp_path / "config.json")
        assert json.loads(path.read_text())["alpha"] == 0.5
        assert RunConfig.load(path) == config

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            RunConfig.load(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            RunConfig.load(bad)
        listing = tmp_path / "list.json"
        listing.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            RunConfig.load(listing)

    def test_with_overrides(self):
        config = RunConfig().with_overrides({"alpha": 0.2, "scan_s": [0.5, 1]})
        assert config.alpha == 0.2
        assert config.scan_s == [0.5, 1.0]

    def test_model_params_view(self):
        params = RunConfig(alpha=0.2, fock_dim=8).model_params(alpha=0.3)
        assert isinstance(params, ModelParams)
        assert params.alpha == 0.3
        assert params.fock_dim == 8
