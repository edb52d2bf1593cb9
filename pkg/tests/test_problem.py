"""Tests of instances, relaxation and the Lagrangian."""

from dataclasses import replace

import numpy as np
import pytest

from dagnn.autodiff import Tape, backward
from dagnn.exceptions import ConfigError, DimensionError
from dagnn.problem import (
    InstanceDistributionConfig,
    MIQPInstance,
    constraint_values,
    generate_instance,
    grad_x_lagrangian,
    lagrangian,
    objective,
    relax,
    spectral_norm,
)


def test_generated_instance_invariants(tiny_instance):
    eigenvalues = np.linalg.eigvalsh(tiny_instance.P)
    assert np.array_equal(tiny_instance.P, tiny_instance.P.T)
    assert eigenvalues.min() >= 1e-2 - 1e-12
    assert tiny_instance.r == 2
    assert list(tiny_instance.int_idx) == sorted(set(tiny_instance.int_idx))


def test_planted_point_is_strictly_feasible(tiny_instance):
    planted = tiny_instance.planted
    assert np.max(tiny_instance.abar @ planted - tiny_instance.bbar) < 0
    assert np.all(np.abs(planted[list(tiny_instance.int_idx)]) == 1.0)


def test_generation_is_deterministic():
    cfg = InstanceDistributionConfig(n=10, m=5, r=3)
    first = generate_instance(cfg, np.random.default_rng(5))
    second = generate_instance(cfg, np.random.default_rng(5))
    assert np.array_equal(first.P, second.P)
    assert np.array_equal(first.abar, second.abar)
    assert first.int_idx == second.int_idx


def test_generation_without_constraints():
    inst = generate_instance(InstanceDistributionConfig(n=4, m=0, r=0), np.random.default_rng(0))
    z = relax(inst)
    assert z.A.shape == (0, 4)
    assert z.S.shape == (4, 4)


def test_density_sparsifies_constraints():
    cfg = InstanceDistributionConfig(n=40, m=30, r=0, density=0.2)
    inst = generate_instance(cfg, np.random.default_rng(3))
    assert np.mean(inst.abar != 0) < 0.5


@pytest.mark.parametrize(
    "changes, path",
    [
        ({"n": 0}, "problem.n"),
        ({"r": 7, "n": 6}, "problem.r"),
        ({"m": -1}, "problem.m"),
        ({"margin": 0.0}, "problem.margin"),
        ({"density": 1.5}, "problem.density"),
    ],
)
def test_invalid_distribution(changes, path):
    with pytest.raises(ConfigError) as info:
        replace(InstanceDistributionConfig(), **changes).validate()

    assert info.value.path == path


def test_relaxation_stacks_box_rows(tiny_instance):
    z = relax(tiny_instance)
    selection = np.zeros((2, 6))
    selection[[0, 1], list(tiny_instance.int_idx)] = 1.0
    assert np.array_equal(z.A, np.vstack([tiny_instance.abar, selection, -selection]))
    assert np.array_equal(z.b, np.concatenate([tiny_instance.bbar, np.ones(4)]))
    assert z.rows == 8 and z.nodes == 14


def test_relaxation_without_integers_keeps_constraints(tiny_instance):
    inst = replace(tiny_instance, int_idx=(), planted=None)
    z = relax(inst)
    assert np.array_equal(z.A, inst.abar)
    assert np.array_equal(z.b, inst.bbar)


def test_shift_operator_is_symmetric_and_normalized(tiny_problem):
    assert np.array_equal(tiny_problem.S, tiny_problem.S.T)
    assert np.linalg.norm(tiny_problem.S, 2) <= 1 + 1e-9


def test_spectral_norm_matches_svd(rng):
    matrix = rng.standard_normal((8, 8))
    matrix = matrix + matrix.T
    assert spectral_norm(matrix) == pytest.approx(np.linalg.norm(matrix, 2), rel=1e-8)


def test_spectral_norm_of_zero_matrix():
    assert spectral_norm(np.zeros((3, 3))) == 0.0


def test_lagrangian_is_objective_plus_weighted_constraints(tiny_problem, rng):
    x = rng.uniform(-1, 1, tiny_problem.n)
    lam = rng.uniform(0, 1, tiny_problem.rows)
    expected = (
        0.5 * x @ tiny_problem.P @ x
        + tiny_problem.q @ x
        + lam @ (tiny_problem.A @ x - tiny_problem.b)
    )
    assert lagrangian(x, lam, tiny_problem).item() == pytest.approx(expected, rel=1e-12)
    assert lagrangian(x, np.zeros(tiny_problem.rows), tiny_problem).item() == pytest.approx(
        objective(x, tiny_problem).item()
    )


def test_constraint_values(tiny_problem, rng):
    x = rng.uniform(-1, 1, tiny_problem.n)
    assert np.allclose(
        constraint_values(x, tiny_problem).vector(), tiny_problem.A @ x - tiny_problem.b
    )


def test_closed_form_gradient_matches_tape(tiny_problem, rng):
    lam = rng.uniform(0, 1, tiny_problem.rows)
    tape = Tape()
    x = tape.variable(rng.uniform(-1, 1, tiny_problem.n))
    taped = backward(lagrangian(x, lam, tiny_problem), [x])[x]
    closed = grad_x_lagrangian(x, lam, tiny_problem).data
    assert np.allclose(taped, closed, atol=1e-12)


def test_lagrangian_rejects_wrong_shapes(tiny_problem):
    with pytest.raises(DimensionError):
        lagrangian(np.zeros(tiny_problem.n + 1), np.zeros(tiny_problem.rows), tiny_problem)

    with pytest.raises(DimensionError):
        grad_x_lagrangian(np.zeros(tiny_problem.n), np.zeros(3), tiny_problem)


def test_instance_rejects_bad_shapes(tiny_instance):
    with pytest.raises(DimensionError):
        MIQPInstance(
            tiny_instance.P[:5, :5],
            tiny_instance.q,
            tiny_instance.abar,
            tiny_instance.bbar,
            tiny_instance.int_idx,
        )

    with pytest.raises(DimensionError):
        replace(tiny_instance, int_idx=(3, 1))
