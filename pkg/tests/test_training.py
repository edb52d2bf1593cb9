"""Tests of constrained primal/dual training."""

from dataclasses import replace
from logging import INFO

import numpy as np
import pytest

from dagnn.autodiff import Tape, backward
from dagnn.checkpoint import load_checkpoint, save_checkpoint
from dagnn.exceptions import ConfigError, ContractError, DivergenceError
from dagnn.gnn import draw_primal_start, primal_forward
from dagnn.problem import lagrangian
from dagnn.training import (
    MetaDuals,
    MultiplierPool,
    PoolEntry,
    TrainConfig,
    TrainState,
    alternate_train,
    collect_multiplier_pool,
    dual_gradients,
    dual_training_step,
    primal_training_step,
)


FAST = TrainConfig(
    rounds=1,
    dual_epochs=1,
    primal_epochs=1,
    batch_instances=2,
    multipliers_per_instance=2,
    lr_primal=1e-3,
    lr_dual=1e-3,
    seed=3,
)


def _state(model, cfg=FAST):
    return TrainState.initial(model, cfg)


def _batch(problems):
    return list(enumerate(problems))


def _same_params(first, second):
    return all(np.array_equal(first.tensors[name], second.tensors[name]) for name in first.tensors)


@pytest.mark.parametrize(
    "changes, path",
    [
        ({"lr_primal": -1e-4}, "training.lr_primal"),
        ({"meta_lr_dual": 0.0}, "training.meta_lr_dual"),
        ({"alpha": 1.5}, "training.alpha"),
        ({"beta": 0.0}, "training.beta"),
        ({"batch_instances": 0}, "training.batch_instances"),
        ({"optimizer": "rmsprop"}, "training.optimizer"),
    ],
)
def test_invalid_training_config(changes, path):
    with pytest.raises(ConfigError) as info:
        replace(TrainConfig(), **changes).validate()

    assert info.value.path == path


def test_rates_are_shared_by_default():
    assert np.array_equal(TrainConfig().descent_rates(3), [0.98, 0.98, 0.98])
    assert np.array_equal(TrainConfig(betas=(0.5, 0.6)).ascent_rates(2), [0.5, 0.6])

    with pytest.raises(ConfigError):
        TrainConfig(alphas=(0.9,)).descent_rates(3)


def test_pool_counts_every_dual_iterate(small_model, tiny_problems):
    state = _state(small_model)
    pool = collect_multiplier_pool(state.primal, state.dual, _batch(tiny_problems[:3]), state.rng)
    assert len(pool) == 3 * (small_model.dual_layers + 1)
    assert all(np.all(entry.multiplier >= 0) for entry in pool)
    assert [entry.layer for entry in pool.for_instance(1)] == [0, 1, 2]


def test_pool_tracks_dual_parameters(small_model, tiny_problems, random_networks):
    state = _state(small_model)
    batch = _batch(tiny_problems[:1])
    stale = collect_multiplier_pool(state.primal, state.dual, batch, np.random.default_rng(0))
    fresh = collect_multiplier_pool(
        state.primal, random_networks[1], batch, np.random.default_rng(0)
    )
    assert not np.array_equal(stale.entries[-1].multiplier, fresh.entries[-1].multiplier)


def test_pool_sampling_requires_entries(rng):
    pool = MultiplierPool([PoolEntry(0, 0, np.zeros(2))])
    assert len(pool.sample(0, 3, rng)) == 3

    with pytest.raises(ConfigError):
        pool.sample(1, 1, rng)


def test_primal_step_rejects_empty_pool(small_model, tiny_problems):
    state = _state(small_model)

    with pytest.raises(ConfigError):
        primal_training_step(_batch(tiny_problems), MultiplierPool(), state, FAST)


def test_primal_step_matches_hand_computed_gradient(small_model, tiny_problem):
    cfg = replace(FAST, multipliers_per_instance=1, constraints=False)
    state = _state(small_model, cfg)
    lam = np.full(tiny_problem.rows, 0.05)
    pool = MultiplierPool([PoolEntry(0, 0, lam)])
    before = state.primal
    replay = np.random.default_rng()
    replay.bit_generator.state = state.rng.bit_generator.state
    replay.integers(1, size=1)
    x0 = draw_primal_start(replay, tiny_problem.n)
    tape = Tape()
    bound = before.bind(tape)
    loss = lagrangian(primal_forward(x0, lam, tiny_problem, bound)[-1], lam, tiny_problem)
    grads = backward(loss, bound.tensors.values())
    primal_training_step([(0, tiny_problem)], pool, state, cfg)

    for name, tensor in bound.tensors.items():
        expected = before.tensors[name] - cfg.lr_primal * grads[tensor]
        assert np.allclose(state.primal.tensors[name], expected, rtol=0, atol=1e-15)


def test_zero_meta_duals_give_unconstrained_step(small_model, tiny_problems):
    pool_state = _state(small_model)
    pool = collect_multiplier_pool(
        pool_state.primal, pool_state.dual, _batch(tiny_problems), pool_state.rng
    )
    constrained = _state(small_model)
    unconstrained = _state(small_model, replace(FAST, constraints=False))
    primal_training_step(_batch(tiny_problems[:2]), pool, constrained, FAST)
    primal_training_step(
        _batch(tiny_problems[:2]), pool, unconstrained, replace(FAST, constraints=False)
    )

    for name, value in unconstrained.primal.tensors.items():
        assert np.allclose(constrained.primal.tensors[name], value, rtol=1e-12, atol=1e-15)

    assert np.all(unconstrained.meta.mu == 0)


def test_zero_learning_rate_only_moves_meta_duals(small_model, tiny_problems):
    cfg = replace(FAST, lr_primal=0.0, meta_lr_primal=1.0)
    state = _state(small_model, cfg)
    state.meta.mu = np.ones(small_model.primal_layers)
    before = state.primal
    pool = collect_multiplier_pool(state.primal, state.dual, _batch(tiny_problems), state.rng)
    _, metrics = primal_training_step(_batch(tiny_problems[:2]), pool, state, cfg)
    assert _same_params(before, state.primal)
    assert not np.array_equal(state.meta.mu, np.ones(small_model.primal_layers))
    assert metrics.slacks.shape == (small_model.primal_layers,)


def test_meta_duals_stay_nonnegative(small_model, tiny_problems):
    cfg = replace(FAST, meta_lr_primal=10.0, meta_lr_dual=10.0)
    state = _state(small_model, cfg)
    state.meta = MetaDuals(np.full(3, 1e-3), np.full(2, 1e-3))
    pool = collect_multiplier_pool(state.primal, state.dual, _batch(tiny_problems), state.rng)

    for _ in range(3):
        primal_training_step(_batch(tiny_problems), pool, state, cfg)
        dual_training_step(_batch(tiny_problems), state, cfg)
        assert np.all(state.meta.mu >= 0) and np.all(state.meta.nu >= 0)


def test_identity_network_with_unit_rate_has_zero_slack(small_model, tiny_problems):
    cfg = replace(FAST, alpha=1.0)
    state = _state(small_model, cfg)
    pool = collect_multiplier_pool(state.primal, state.dual, _batch(tiny_problems), state.rng)
    _, metrics = primal_training_step(_batch(tiny_problems), pool, state, cfg)
    assert np.allclose(metrics.slacks, 0.0, atol=1e-12)
    assert np.all(state.meta.mu == 0)


def test_dual_gradients_leave_primal_untouched(small_model, tiny_problems):
    state = _state(small_model)
    state.meta.nu = np.ones(small_model.dual_layers)
    result = dual_gradients(_batch(tiny_problems), state, FAST)
    assert all(not np.any(grad) for grad in result.primal.values())
    assert any(np.any(grad) for grad in result.dual.values())
    assert result.slacks.shape == (small_model.dual_layers,)


def test_dual_step_updates_only_dual_network(small_model, tiny_problems):
    state = _state(small_model)
    primal, dual = state.primal, state.dual
    dual_training_step(_batch(tiny_problems), state, FAST)
    assert _same_params(primal, state.primal)
    assert not _same_params(dual, state.dual)
    assert state.step == 1


def test_zero_nu_gives_unconstrained_dual_step(small_model, tiny_problems):
    constrained = _state(small_model)
    unconstrained = _state(small_model, replace(FAST, constraints=False))
    dual_training_step(_batch(tiny_problems), constrained, FAST)
    dual_training_step(_batch(tiny_problems), unconstrained, replace(FAST, constraints=False))

    for name, value in unconstrained.dual.tensors.items():
        assert np.allclose(constrained.dual.tensors[name], value, rtol=1e-12, atol=1e-15)


def test_zero_rounds_is_a_no_op(small_model, tiny_problems):
    state = _state(small_model)
    primal = state.primal
    result, rows = alternate_train(tiny_problems, replace(FAST, rounds=0), state)
    assert result is state
    assert rows == []
    assert _same_params(primal, result.primal)


def test_empty_training_set_is_rejected(small_model):
    with pytest.raises(ContractError):
        alternate_train([], FAST, _state(small_model))


def test_alternation_starts_with_dual_phase(small_model, tiny_problems, tmp_path):
    logged = []
    state, rows = alternate_train(
        tiny_problems, FAST, _state(small_model), checkpoint_dir=tmp_path, log=logged.append
    )
    assert rows == logged
    assert [row.phase for row in rows] == ["dual", "dual", "primal", "primal"]
    assert [row.step for row in rows] == [1, 2, 3, 4]
    assert all(row.wallclock_ms == 0.0 for row in rows)
    assert state.round == 1
    assert (tmp_path / "round-001.json").exists()


def test_pool_rebuild_is_logged_each_round(small_model, tiny_problems, caplog):
    caplog.set_level(INFO, logger="dagnn.training")
    alternate_train(tiny_problems, replace(FAST, rounds=2), _state(small_model))
    rebuilt = [
        record.getMessage()
        for record in caplog.records
        if "rebuilt the multiplier pool" in record.getMessage()
    ]
    assert len(rebuilt) == 2
    assert rebuilt[0].startswith("Round 0:")


def test_training_is_deterministic(small_model, tiny_problems):
    first, first_rows = alternate_train(tiny_problems, FAST, _state(small_model))
    second, second_rows = alternate_train(tiny_problems, FAST, _state(small_model))
    assert first_rows == second_rows
    assert _same_params(first.primal, second.primal)
    assert _same_params(first.dual, second.dual)
    assert np.array_equal(first.meta.mu, second.meta.mu)


def test_meta_dual_reset(small_model, tiny_problems):
    cfg = replace(FAST, rounds=2, reset_meta_duals=True)
    state = _state(small_model, cfg)
    state.meta = MetaDuals(np.full(3, 5.0), np.full(2, 5.0))
    state, _ = alternate_train(tiny_problems, cfg, state)
    assert np.all(state.meta.mu < 5.0)


def test_divergence_is_reported(small_model, tiny_problems):
    state = _state(small_model)
    state.primal = state.primal.replace(
        {**state.primal.tensors, "layer1.c": np.full((1, 1), np.nan)}
    )

    with pytest.raises(DivergenceError) as info:
        alternate_train(tiny_problems, FAST, state)

    assert info.value.phase == "dual"
    assert info.value.exit_code == 3


def test_resume_matches_uninterrupted_run(small_model, tiny_problems, tmp_path):
    cfg = replace(FAST, rounds=2, optimizer="adam")
    full, _ = alternate_train(tiny_problems, cfg, _state(small_model, cfg))
    half, _ = alternate_train(
        tiny_problems, replace(cfg, rounds=1), _state(small_model, cfg), checkpoint_dir=tmp_path
    )
    resumed = TrainState.from_checkpoint(load_checkpoint(tmp_path / "round-001.json"))
    resumed, _ = alternate_train(tiny_problems, cfg, resumed)
    assert _same_params(full.primal, resumed.primal)
    assert _same_params(full.dual, resumed.dual)
    assert np.array_equal(full.meta.nu, resumed.meta.nu)


def test_checkpoint_round_trip_is_bit_exact(small_model, tiny_problems, tmp_path):
    cfg = replace(FAST, optimizer="adam")
    state, _ = alternate_train(tiny_problems, cfg, _state(small_model, cfg))
    save_checkpoint(tmp_path / "state.json", state.to_checkpoint())
    restored = TrainState.from_checkpoint(load_checkpoint(tmp_path / "state.json"))
    assert _same_params(state.primal, restored.primal)
    assert _same_params(state.dual, restored.dual)
    assert np.array_equal(state.meta.mu, restored.meta.mu)
    assert restored.rng.bit_generator.state == state.rng.bit_generator.state
    assert (restored.round, restored.epoch, restored.step, restored.phase) == (
        state.round,
        state.epoch,
        state.step,
        state.phase,
    )
    assert restored.primal_optimizer.to_json() == state.primal_optimizer.to_json()
