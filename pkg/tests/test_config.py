import logging

import pytest

from collocation.config import COMMANDS, RunConfig, SolverOptions
from collocation.config_loader import (
    load_config_mapping,
    load_run_config,
    parse_key_value_text,
    save_run_config,
)
from collocation.errors import ConfigError

from conftest import PROFILES_DIR, write_config


class TestKeyValueText:
    def test_parses_keys_and_comments(self):
        text = """
        # a comment
        command = sweep
        G.b = 2   # square root
        sweep.h = 0.1, 0.01
        """
        assert parse_key_value_text(text) == {"command": "sweep", "G.b": "2", "sweep.h": "0.1, 0.01"}

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_key_value_text("T = 1\nT = 2\n")

    def test_line_without_separator(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_key_value_text("T = 1\njust words\n")


class TestFromMapping:
    def test_defaults(self):
        config = RunConfig.from_mapping({})
        assert config.command == "solve"
        assert config.kernel == "power_convolution"
        assert config.kernel_params == {"a": 1.0}
        assert config.nonlinearity_params == {"b": 2.0}
        assert config.sweep_h == (0.1, 0.01, 0.001)
        assert config.options == SolverOptions()

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="Unknown configuration keys: colour"):
            RunConfig.from_mapping({"colour": "red"})

    def test_case_parameters(self):
        assert RunConfig.from_mapping({"case": "1", "c1": "0.5"}).c == (0.5,)
        assert RunConfig.from_mapping({"case": "2", "c2": "0.37"}).c == (0.0, 0.37)
        assert RunConfig.from_mapping({"c": "0.2, 0.6, 1.0"}).c == (0.2, 0.6, 1.0)

    @pytest.mark.parametrize(
        "data",
        [
            {"case": "3"},
            {"case": "2", "c": "0.1, 0.5"},
            {"case": "1", "c": "0.1, 0.5"},
            {"case": "2", "c1": "0.5"},
            {"mesh.N": "10", "mesh.h": "0.1"},
            {"mesh.N": "2.5"},
            {"kernel.a": "steep"},
            {"kernel": "gaussian"},
            {"G": "power"},
            {"command": "plot"},
            {"output.timings": "maybe"},
            {"sweep.c_start": "0.5", "sweep.c_stop": "0.1"},
            {"solver.scan_ratio": "1.0"},
        ],
    )
    def test_invalid(self, data):
        with pytest.raises(ConfigError):
            RunConfig.from_mapping(data)

    def test_solver_options(self):
        config = RunConfig.from_mapping({"solver.scan_cap": "1e6", "solver.quadrature_nodes": "8"})
        assert config.options.scan_cap == 1e6
        assert config.options.quadrature_nodes == 8

    def test_constant_kernel_default_value(self):
        config = RunConfig.from_mapping({"kernel": "constant"})
        assert config.kernel_params == {"value": 1.0}
        assert config.build_kernel().parameters == {"value": 1.0}

    def test_to_problem(self):
        config = RunConfig.from_mapping({"mesh.h": "0.05", "case": "2", "c2": "0.5", "G.b": "3"})
        problem = config.to_problem()
        assert problem.mesh.N == 20
        assert problem.params.c == (0.0, 0.5)
        assert problem.nonlinearity.parameters == {"b": 3.0}
        assert config.to_problem(c=0.25, h=0.1).params.c == (0.0, 0.25)

    def test_missing_parameters(self):
        with pytest.raises(ConfigError):
            RunConfig.from_mapping({}).to_problem()
        with pytest.raises(ConfigError):
            RunConfig.from_mapping({"c": "0.5"}).build_params(c=0.3)


@pytest.mark.parametrize(
    "name", ["table1.conf", "table2.conf", "solve_case2.yaml", "classify_power.conf", "probe_square.yaml", "sweep_rate.conf"]
)
def test_bundled_profiles_load(name):
    config = load_run_config(PROFILES_DIR / name)
    assert config.command in COMMANDS


def test_yaml_profile_is_flattened():
    config = load_run_config(PROFILES_DIR / "solve_case2.yaml")
    assert config.case == 2
    assert config.c == (0.0, 0.5)
    assert config.nonlinearity == "power_root"
    assert config.nonlinearity_params == {"b": 3.0}
    assert config.mesh_h == 0.01
    assert config.output_path == "solve_case2.csv"

    probe = load_run_config(PROFILES_DIR / "probe_square.yaml")
    assert probe.nonlinearity_params == {"p": 2.0}
    assert probe.probe_h0 == (0.1, 0.05, 0.02, 0.01)


@pytest.mark.parametrize("suffix", [".conf", ".yaml"])
def test_save_and_load_round_trip(tmp_path, suffix):
    config = RunConfig.from_mapping({
        "command": "sweep",
        "G.b": "3",
        "case": "2",
        "c2": "0.4",
        "mesh.N": "40",
        "sweep.h": "0.1, 0.05",
        "probe.h0": "0.1, 1e-05",
        "solver.scan_cap": "1e8",
        "output.path": "out.csv",
        "output.timings": "true",
        "threads": "0",
    })
    path = tmp_path / f"run{suffix}"
    save_run_config(config, path)
    assert load_run_config(path) == config


def test_loader_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config_mapping(tmp_path / "missing.conf")
    with pytest.raises(ConfigError):
        load_config_mapping(write_config(tmp_path, "a: [1, 2\n", "broken.yaml"))
    with pytest.raises(ConfigError):
        load_config_mapping(write_config(tmp_path, "- 1\n- 2\n", "list.yaml"))


def test_from_environment(tmp_path, monkeypatch):
    path = write_config(tmp_path, "command = classify\ncase = 1\nc1 = 0.5\n")
    monkeypatch.setenv("COLLOCATION_CONFIG", str(path))
    monkeypatch.setenv("COLLOCATION_THREADS", "4")
    monkeypatch.setenv("COLLOCATION_DEBUG", "true")
    config = RunConfig.from_environment()
    assert config.command == "classify"
    assert config.threads == 4
    assert config.debug is True


def test_from_environment_defaults(monkeypatch):
    for name in ("COLLOCATION_CONFIG", "COLLOCATION_THREADS", "COLLOCATION_DEBUG"):
        monkeypatch.delenv(name, raising=False)
    assert RunConfig.from_environment() == RunConfig()


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(quadrature_nodes=0),
        dict(scan_ratio=1.0),
        dict(scan_refinement=0),
        dict(scan_floor=0.0),
        dict(scan_cap=1e-310),
        dict(damping=0.0),
        dict(damping=1.5),
        dict(max_iterations=0),
    ],
)
def test_solver_options_validation(kwargs):
    with pytest.raises(ConfigError):
        SolverOptions(**kwargs)


def test_log_config(caplog):
    caplog.set_level(logging.INFO)
    RunConfig.from_mapping({"command": "reproduce-table1"}).log_config()
    assert "COLLOCATION RUN - CONFIGURATION" in caplog.text
    assert "Sweep: h in (0.1, 0.01, 0.001)" in caplog.text
