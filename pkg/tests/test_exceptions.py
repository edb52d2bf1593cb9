"""Tests of error messages and exit codes."""

import pytest

from dagnn.exceptions import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    DivergenceError,
    InstanceInvalid,
    SelfTestFailure,
    SizeLimitExceeded,
)


@pytest.mark.parametrize(
    "error, code",
    [
        (ConfigError("training.alpha", "must lie in (0, 1]"), 1),
        (ContractError("empty training set"), 1),
        (DimensionError("matmul", (2, 2), (3, 1)), 1),
        (SizeLimitExceeded(30, 40, 12, 16), 1),
        (InstanceInvalid("P is not positive definite."), 2),
        (DataError("data/manifest.json", "No such file."), 2),
        (DivergenceError("primal", 1, 2, 3, float("nan")), 3),
        (SelfTestFailure(["ad-coupled"]), 4),
    ],
)
def test_exit_codes(error, code):
    assert error.exit_code == code


def test_dimension_error_names_both_shapes():
    message = str(DimensionError("matmul", (2, 2), (3, 1)))
    assert "(2, 2)" in message and "(3, 1)" in message


def test_divergence_error_names_its_position():
    message = str(DivergenceError("dual", 4, 1, 17, float("inf")))
    assert "dual" in message and "round 4" in message and "step 17" in message


def test_config_error_names_the_key():
    assert "training.lr_primal" in str(ConfigError("training.lr_primal", "must be positive"))


def test_self_test_failure_lists_checks():
    error = SelfTestFailure(["oracle-kkt", "active-set"])
    assert str(error).startswith("2 self-test(s) failed")
    assert "active-set" in str(error)
