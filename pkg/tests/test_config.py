"""Tests for configuration loading, validation and overrides."""

import json
from pathlib import Path

import pytest

from fracns.config import (ExperimentConfig, FileData, RandomData, TaylorGreenData,
                           apply_env_overrides, apply_overrides, load_config, validate_config)
from fracns.exceptions import ConfigError


def _write(directory, data, name="config.json"):
    path = directory / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return path


class TestDefaults:
    """Defaults and derived objects."""

    def test_default_values(self):
        config = ExperimentConfig()
        assert config.experiment == "simulate"
        assert config.alpha == 0.8
        assert config.resolution == 32
        assert isinstance(config.initial_data, TaylorGreenData)
        assert config.output_dir == Path("runs")

    def test_derived_objects(self):
        config = validate_config({"t_end": 2.0, "steps": 8,
                                  "tolerances": {"picard_tol": 1e-10, "ml_z_max": 20.0}})
        grid = config.time_grid()
        assert grid.t_end == 2.0 and grid.steps == 8
        solver_config = config.solver_config(alpha=0.9)
        assert solver_config.alpha == 0.9
        assert solver_config.picard_tol == 1e-10
        assert solver_config.ml_policy.z_max == 20.0
        assert config.solver_config().alpha == 0.8

    def test_echo_round_trip(self):
        config = validate_config({"experiment": "estimates", "alpha": 0.6,
                                  "initial_data": {"kind": "random-bandlimited", "band": 3}})
        echoed = config.echo()
        assert json.loads(json.dumps(echoed)) == echoed
        assert validate_config(echoed) == config


class TestValidation:
    """Errors name the offending key."""

    @pytest.mark.parametrize("data,key", [
        ({"resolution": 33}, "resolution"),
        ({"bogus": 1}, "bogus"),
        ({"alpha": 1.5}, "alpha"),
        ({"dim": 4}, "dim"),
        ({"estimates": {"pp": 1}}, "estimates.pp"),
        ({"limit_check": {"alphas": [0.5, 1.5]}}, "limit_check.alphas"),
        ({"initial_data": {"kind": "random-bandlimited", "band": 0}}, "initial_data.band"),
        ({"experiment": "explode"}, "experiment"),
        ({"specfun": {"function": "mainardi", "alphas": [1.0]}}, "specfun.alphas"),
        ({"specfun": {"function": "mainardi-moment", "alphas": [0.5, 0.0]}}, "specfun.alphas"),
        ({"specfun": {"alphas": [1.2]}}, "specfun.alphas"),
        ({"specfun": {"betas": [2.5]}}, "specfun.betas"),
    ])
    def test_invalid_key(self, data, key):
        with pytest.raises(ConfigError) as excinfo:
            validate_config(data)
        assert excinfo.value.key == key
        assert key in str(excinfo.value)

    def test_specfun_orders(self):
        """alpha = 1 is a valid Mittag-Leffler order but not a Mainardi one."""
        config = validate_config({"specfun": {"alphas": [0.3, 1.0], "betas": [0.5, 2.0]}})
        assert config.specfun.alphas == [0.3, 1.0]
        config = validate_config({"specfun": {"function": "mainardi", "alphas": [0.25, 0.999]}})
        assert config.specfun.alphas == [0.25, 0.999]

    def test_initial_data_kinds(self):
        config = validate_config({"initial_data": {"kind": "file", "path": "u.bin"}})
        assert isinstance(config.initial_data, FileData)
        assert config.initial_data.path == Path("u.bin")
        with pytest.raises(ConfigError):
            validate_config({"initial_data": {"kind": "vortex-sheet"}})


class TestLoading:
    """JSON files, environment variables and flag overrides."""

    def test_load_file(self, temp_output_dir):
        path = _write(temp_output_dir, {"experiment": "uniqueness", "alpha": 0.6,
                                        "initial_data": {"kind": "random-bandlimited", "band": 3}})
        config = load_config(path, environ={})
        assert config.experiment == "uniqueness"
        assert isinstance(config.initial_data, RandomData)
        assert config.initial_data.band == 3

    def test_defaults_without_file(self):
        assert load_config(environ={}) == ExperimentConfig()

    def test_invalid_json(self, temp_output_dir):
        path = _write(temp_output_dir, "{not json")
        with pytest.raises(ConfigError) as excinfo:
            load_config(path, environ={})
        assert excinfo.value.key == "<root>"

    def test_non_object(self, temp_output_dir):
        with pytest.raises(ConfigError):
            load_config(_write(temp_output_dir, [1, 2]), environ={})

    def test_missing_file(self, temp_output_dir):
        with pytest.raises(ConfigError) as excinfo:
            load_config(temp_output_dir / "absent.json", environ={})
        assert excinfo.value.key == "--config"

    def test_environment_overrides(self):
        environ = {"FRACNS_ALPHA": "0.5", "FRACNS_ESTIMATES__P": "3",
                   "FRACNS_OUTPUT_DIR": "out/x", "HOME": "/root"}
        config = load_config(environ=environ)
        assert config.alpha == 0.5
        assert config.estimates.p == 3.0
        assert config.output_dir == Path("out/x")

    def test_environment_reads_os_environ(self, monkeypatch):
        monkeypatch.setenv("FRACNS_SPECFUN__ALPHAS", "[0.3, 0.7]")
        assert load_config().specfun.alphas == [0.3, 0.7]

    def test_malformed_variable(self):
        with pytest.raises(ConfigError):
            apply_env_overrides({}, {"FRACNS_ESTIMATES__": "1"})

    def test_overrides_win_over_environment(self, temp_output_dir):
        path = _write(temp_output_dir, {"alpha": 0.6, "seed": 1})
        config = load_config(path, environ={"FRACNS_ALPHA": "0.5"},
                             overrides={"alpha": 0.7, "seed": None})
        assert config.alpha == 0.7
        assert config.seed == 1

    def test_overrides_do_not_mutate_input(self):
        data = {"estimates": {"p": 2.0}}
        merged = apply_overrides(data, {"estimates.q": 3.0})
        assert merged == {"estimates": {"p": 2.0, "q": 3.0}}
        assert data == {"estimates": {"p": 2.0}}


class TestSampleConfigs:
    """The files shipped in configs/ stay valid."""

    CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

    def test_every_sample_validates(self):
        paths = sorted(self.CONFIG_DIR.glob("*.json"))
        assert len(paths) == 7
        experiments = {load_config(path, environ={}).experiment for path in paths}
        assert experiments == {"simulate", "limit-check", "uniqueness", "estimates",
                               "gronwall-check", "specfun", "fracops"}
