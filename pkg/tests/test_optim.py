"""Tests of the parameter update rules."""

import numpy as np
import pytest

from dagnn.exceptions import ConfigError
from dagnn.optim import Adam, GradientDescent, clip_by_norm, make_optimizer


def test_gradient_descent_step():
    params = {"w": np.array([1.0, 2.0])}
    updated = GradientDescent().step(params, {"w": np.array([0.5, -1.0])}, 0.1)
    assert np.allclose(updated["w"], [0.95, 2.1])
    assert np.array_equal(params["w"], [1.0, 2.0])


def test_adam_first_step_moves_by_learning_rate():
    updated = Adam().step({"w": np.zeros(2)}, {"w": np.array([3.0, -0.2])}, 0.01)
    assert np.allclose(updated["w"], [-0.01, 0.01], rtol=1e-6)


def test_adam_state_round_trip():
    adam = Adam()
    adam.step({"w": np.zeros(2)}, {"w": np.array([1.0, 2.0])}, 0.1)
    restored = make_optimizer("adam", adam.to_json())
    assert restored.steps == 1
    assert np.array_equal(restored.first["w"], adam.first["w"])


def test_clipping():
    grad = np.array([30.0, 40.0])
    assert np.allclose(clip_by_norm(grad, 5.0), [3.0, 4.0])
    assert np.array_equal(clip_by_norm(grad, 100.0), grad)
    assert np.array_equal(clip_by_norm(grad, None), grad)


def test_unknown_optimizer():
    with pytest.raises(ConfigError):
        make_optimizer("lbfgs")
