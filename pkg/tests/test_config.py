"""Tests of configuration files, overrides and run directories."""

from datetime import datetime

import pytest

from dagnn.config import (
    RunDirectory,
    fingerprint,
    make_run_dir,
    parse_config,
    parse_override,
    snapshot,
)
from dagnn.exceptions import ConfigError, DataError


def test_empty_file_yields_defaults(tmp_path):
    (tmp_path / "empty.yaml").write_text("")
    config = parse_config(tmp_path / "empty.yaml")
    assert (config.problem.n, config.problem.m, config.problem.r) == (80, 45, 10)
    assert config.model.primal_layers == config.model.dual_layers == 14
    assert (config.model.sublayers, config.model.taps, config.model.features) == (3, 1, 32)
    assert (config.training.alpha, config.training.beta) == (0.98, 0.95)
    assert config.training.optimizer == "sgd"


def test_file_and_overrides_are_merged(tmp_path):
    (tmp_path / "run.yaml").write_text("problem:\n  n: 20\n  m: 12\ntraining:\n  rounds: 3\n")
    config = parse_config(tmp_path / "run.yaml", {"problem.m": 30, "model.features": 8})
    assert (config.problem.n, config.problem.m) == (20, 30)
    assert config.training.rounds == 3
    assert config.model.features == 8


def test_negative_learning_rate_names_the_key():
    with pytest.raises(ConfigError) as info:
        parse_config(overrides={"training.lr_primal": -1})

    assert info.value.path == "training.lr_primal"


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(overrides={"model.layers": 3})

    assert info.value.path == "model.layers"


@pytest.mark.parametrize(
    "overrides",
    [
        {"problem.n": "many"},
        {"problem.n": 2.5},
        {"training.optimizer": "rmsprop"},
        {"training.constraints": "maybe"},
        {"model": 3},
    ],
)
def test_invalid_values(overrides):
    with pytest.raises(ConfigError):
        parse_config(overrides=overrides)


def test_missing_file_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        parse_config(tmp_path / "absent.yaml")


def test_override_values_are_yaml():
    assert parse_override("training.lr_dual=1.0e-3") == ("training.lr_dual", 1e-3)
    assert parse_override("training.constraints=off") == ("training.constraints", False)
    assert parse_override("sweep.grid=0,2,4") == ("sweep.grid", "0,2,4")
    assert parse_override("paths.tag=") == ("paths.tag", "")

    with pytest.raises(ConfigError):
        parse_override("no-equals-sign")


def test_comma_separated_grid():
    assert parse_config(overrides={"sweep.grid": "0,2,4"}).sweep.grid == (0, 2, 4)


def test_sections_inherit_the_master_seed():
    config = parse_config(overrides={"seed": 7, "eval.seed": 2})
    assert config.problem.seed == config.training.seed == 7
    assert config.eval.seed == 2


def test_snapshot_round_trip(tmp_path):
    config = parse_config(overrides={"seed": 3, "problem.n": 20, "sweep.grid": [0, 2]})
    snapshot(config, tmp_path / "config.yaml")
    assert fingerprint(parse_config(tmp_path / "config.yaml")) == fingerprint(config)


def test_fingerprint_changes_with_config():
    assert fingerprint(parse_config()) != fingerprint(parse_config(overrides={"seed": 1}))


def test_run_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DAGNN_RUN_ROOT", str(tmp_path / "elsewhere"))
    config = parse_config(overrides={"paths.tag": "ablation"})
    run = make_run_dir(config, now=datetime(2024, 5, 6, 7, 8, 9))
    assert run.root == tmp_path / "elsewhere" / "20240506T070809-ablation"
    assert run.config.exists()
    assert run.checkpoints.is_dir() and run.logs.is_dir() and run.reports.is_dir()


def test_explicit_run_directory(tmp_path):
    run = make_run_dir(parse_config(), tmp_path / "run")
    assert run == RunDirectory(tmp_path / "run")
    assert "problem:" in run.config.read_text()


def test_exponent_strings_become_floats():
    assert parse_config(overrides={"training.lr_dual": "1e-3"}).training.lr_dual == 1e-3
