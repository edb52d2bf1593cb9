"""Alternating constrained training of the primal and dual networks."""

from __future__ import annotations
from collections import defaultdict
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from time import perf_counter
from typing import Callable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

from dagnn.autodiff import Tape, backward, l2norm, scale
from dagnn.batching import Batcher
from dagnn.checkpoint import Checkpoint, save_checkpoint
from dagnn.exceptions import ConfigError, ContractError, DivergenceError
from dagnn.gnn import (
    DualParams,
    ModelConfig,
    PrimalParams,
    coupled_forward,
    draw_dual_start,
    draw_primal_start,
    init_params,
    primal_forward,
)
from dagnn.optim import clip_by_norm, make_optimizer
from dagnn.problem import RelaxedQP, constraint_values, grad_x_lagrangian, lagrangian
from dagnn.types import LogRow, Phase


__all__ = [
    "DualGradients",
    "MetaDuals",
    "MultiplierPool",
    "PoolEntry",
    "StepMetrics",
    "TrainConfig",
    "TrainState",
    "alternate_train",
    "collect_multiplier_pool",
    "dual_gradients",
    "dual_training_step",
    "primal_training_step",
]


LOGGER = getLogger("dagnn.training")
Batch = Sequence[tuple[int, RelaxedQP]]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the alternating training scheme.
    Empty alphas/betas mean the shared alpha/beta applies to every layer.
    """

    alpha: float = 0.98
    beta: float = 0.95
    alphas: tuple[float, ...] = ()
    betas: tuple[float, ...] = ()
    lr_primal: float = 1e-4
    lr_dual: float = 7e-4
    meta_lr_primal: float = 1e-4
    meta_lr_dual: float = 1e-3
    rounds: int = 10
    dual_epochs: int = 20
    primal_epochs: int = 20
    batch_instances: int = 32
    multipliers_per_instance: int = 4
    constraints: bool = True
    optimizer: str = "sgd"
    clip_gradients: bool = False
    clip_norm: float = 100.0
    reset_meta_duals: bool = False
    record_wallclock: bool = False
    seed: int = 0

    def validate(self, path: str = "training") -> None:
        """Raises a ConfigError on invalid values."""
        for name in ("alpha", "beta"):
            for rate in (getattr(self, name), *getattr(self, f"{name}s")):
                if not 0 < rate <= 1:
                    raise ConfigError(f"{path}.{name}", "rates must lie in (0, 1]")

        for name in ("lr_primal", "lr_dual", "meta_lr_primal", "meta_lr_dual", "clip_norm"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{path}.{name}", "must be positive")

        for name in ("rounds", "dual_epochs", "primal_epochs"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{path}.{name}", "must not be negative")

        for name in ("batch_instances", "multipliers_per_instance"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{path}.{name}", "must be at least 1")

        make_optimizer(self.optimizer)

    def descent_rates(self, layers: int) -> np.ndarray:
        """Returns α_1, ..., α_K."""
        return self._rates(self.alpha, self.alphas, layers, "alphas")

    def ascent_rates(self, layers: int) -> np.ndarray:
        """Returns β_1, ..., β_L."""
        return self._rates(self.beta, self.betas, layers, "betas")

    @staticmethod
    def _rates(shared: float, rates: tuple, layers: int, name: str) -> np.ndarray:
        if not rates:
            return np.full(layers, shared)

        if len(rates) != layers:
            raise ConfigError(f"training.{name}", f"expected {layers} values")

        return np.array(rates, dtype=np.float64)


@dataclass
class MetaDuals:
    """Multipliers μ (primal descent) and ν (dual ascent) of training."""

    mu: np.ndarray
    nu: np.ndarray

    @classmethod
    def zeros(cls, primal_layers: int, dual_layers: int) -> MetaDuals:
        """Returns all-zero meta duals."""
        return cls(np.zeros(primal_layers), np.zeros(dual_layers))

    def to_json(self) -> dict:
        """Returns a JSON representation of the meta duals."""
        return {"mu": self.mu.tolist(), "nu": self.nu.tolist()}

    @classmethod
    def from_json(cls, json: dict) -> MetaDuals:
        """Creates meta duals from a JSON-ish dict."""
        return cls(
            np.array(json["mu"], dtype=np.float64), np.array(json["nu"], dtype=np.float64)
        )


@dataclass
class TrainState:
    """Everything needed to resume training bit-exactly."""

    primal: PrimalParams
    dual: DualParams
    meta: MetaDuals
    rng: np.random.Generator
    primal_optimizer: object
    dual_optimizer: object
    phase: Phase = "dual"
    round: int = 0
    epoch: int = 0
    step: int = 0
    seed: int = 0

    @classmethod
    def initial(
        cls,
        model: ModelConfig,
        cfg: TrainConfig,
        n: Optional[int] = None,
        rows: Optional[int] = None,
    ) -> TrainState:
        """Returns an identity-initialized state.
        n and rows are only needed for per-node biases.
        """
        rng = np.random.default_rng(cfg.seed)
        primal = init_params(rng, model.primal(n), PrimalParams)
        dual = init_params(rng, model.dual(rows), DualParams)
        return cls(
            primal=primal,
            dual=dual,
            meta=MetaDuals.zeros(model.primal_layers, model.dual_layers),
            rng=rng,
            primal_optimizer=make_optimizer(cfg.optimizer),
            dual_optimizer=make_optimizer(cfg.optimizer),
            seed=cfg.seed,
        )

    def to_checkpoint(self) -> Checkpoint:
        """Returns a checkpoint of the state."""
        return Checkpoint(
            primal=self.primal,
            dual=self.dual,
            seed=self.seed,
            counters={
                "phase": self.phase,
                "round": self.round,
                "epoch": self.epoch,
                "step": self.step,
            },
            extras={
                "meta": self.meta.to_json(),
                "rng": self.rng.bit_generator.state,
                "primalOptimizer": self.primal_optimizer.to_json(),
                "dualOptimizer": self.dual_optimizer.to_json(),
            },
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> TrainState:
        """Restores the state from a checkpoint."""
        extras = checkpoint.extras
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = extras["rng"]
        primal_opt, dual_opt = extras["primalOptimizer"], extras["dualOptimizer"]
        return cls(
            primal=checkpoint.primal,
            dual=checkpoint.dual,
            meta=MetaDuals.from_json(extras["meta"]),
            rng=rng,
            primal_optimizer=make_optimizer(primal_opt["name"], primal_opt),
            dual_optimizer=make_optimizer(dual_opt["name"], dual_opt),
            phase=checkpoint.counters.get("phase", "dual"),
            round=checkpoint.counters.get("round", 0),
            epoch=checkpoint.counters.get("epoch", 0),
            step=checkpoint.counters.get("step", 0),
            seed=checkpoint.seed,
        )


class StepMetrics(NamedTuple):
    """Metrics of one training step."""

    loss: float
    slacks: np.ndarray
    mu_norm: float
    nu_norm: float

    @property
    def mean_slack(self) -> float:
        """Returns the mean constraint slack."""
        return float(np.mean(self.slacks)) if self.slacks.size else 0.0


class PoolEntry(NamedTuple):
    """A multiplier harvested from a dual trajectory."""

    instance: int
    layer: int
    multiplier: np.ndarray


class MultiplierPool:
    """Multipliers produced by the dual network, grouped by instance."""

    def __init__(self, entries: Sequence[PoolEntry] = ()):
        self.entries: list[PoolEntry] = []
        self._by_instance: dict[int, list[PoolEntry]] = defaultdict(list)

        for entry in entries:
            self.add(entry)

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[PoolEntry]:
        return iter(self.entries)

    def add(self, entry: PoolEntry) -> None:
        """Adds an entry."""
        self.entries.append(entry)
        self._by_instance[entry.instance].append(entry)

    def for_instance(self, instance: int) -> list[PoolEntry]:
        """Returns the entries of an instance."""
        return list(self._by_instance.get(instance, ()))

    def sample(
        self, instance: int, count: int, rng: np.random.Generator
    ) -> list[np.ndarray]:
        """Draws multipliers of an instance uniformly with replacement."""
        if not (entries := self._by_instance.get(instance)):
            raise ConfigError(
                "training.pool", f"no multipliers collected for instance {instance}"
            )

        return [entries[index].multiplier for index in rng.integers(len(entries), size=count)]


def collect_multiplier_pool(
    primal: PrimalParams,
    dual: DualParams,
    instances: Batch,
    rng: np.random.Generator,
) -> MultiplierPool:
    """Runs the coupled networks and harvests λ_0, ..., λ_L per instance."""

    pool = MultiplierPool()
    bound_primal, bound_dual = primal.bind(), dual.bind()

    for index, z in instances:
        x0 = draw_primal_start(rng, z.n, dual.arch.layers + 1)
        lam0 = draw_dual_start(rng, z.rows)
        trajectory = coupled_forward(z, bound_primal, bound_dual, x0, lam0)

        for layer, lam in enumerate(trajectory.duals):
            pool.add(PoolEntry(index, layer, lam.vector()))

    return pool


def _accumulate(total: dict, grads: dict, weight: float) -> None:
    """Adds weighted gradients in place."""

    for name, grad in grads.items():
        total[name] = total[name] + weight * grad if name in total else weight * grad


def _finalize(grads: dict, cfg: TrainConfig) -> dict:
    """Applies optional per-tensor clipping."""

    if not cfg.clip_gradients:
        return grads

    return {name: clip_by_norm(grad, cfg.clip_norm) for name, grad in grads.items()}


def _check_finite(loss: float, state: TrainState, phase: Phase) -> None:
    """Raises a DivergenceError on non-finite losses."""

    if not np.isfinite(loss):
        raise DivergenceError(phase, state.round, state.epoch, state.step, loss)


def _primal_sample(
    z: RelaxedQP,
    lam: np.ndarray,
    state: TrainState,
    alphas: np.ndarray,
    constrained: bool,
) -> tuple[dict, float, np.ndarray]:
    """Forward/backward of one (instance, multiplier) pair."""

    tape = Tape()
    bound = state.primal.bind(tape)
    trajectory = primal_forward(draw_primal_start(state.rng, z.n), lam, z, bound)
    norms = [l2norm(grad_x_lagrangian(x, lam, z)) for x in trajectory]
    loss = lagrangian(trajectory[-1], lam, z)
    objective = loss

    if constrained:
        for k, (mu, alpha) in enumerate(zip(state.meta.mu, alphas), start=1):
            objective = objective + scale(norms[k] - scale(norms[k - 1], alpha), mu)

    grads = backward(objective, bound.tensors.values())
    return (
        {name: grads[tensor] for name, tensor in bound.tensors.items()},
        loss.item(),
        np.array([norm.item() for norm in norms]),
    )


def primal_training_step(
    batch: Batch, pool: MultiplierPool, state: TrainState, cfg: TrainConfig
) -> tuple[TrainState, StepMetrics]:
    """One step of primal training with descent constraints.
    The state is updated in place and returned.
    """

    if not len(pool):
        raise ConfigError("training.pool", "the multiplier pool is empty")

    alphas = cfg.descent_rates(state.primal.arch.layers)
    samples = [
        (z, lam)
        for index, z in batch
        for lam in pool.sample(index, cfg.multipliers_per_instance, state.rng)
    ]
    weight = 1.0 / len(samples)
    grads, losses, norms = {}, [], []

    for z, lam in samples:
        sample_grads, loss, sample_norms = _primal_sample(
            z, lam, state, alphas, cfg.constraints
        )
        _accumulate(grads, sample_grads, weight)
        losses.append(loss)
        norms.append(sample_norms)

    loss = float(np.mean(losses))
    _check_finite(loss, state, "primal")
    mean_norms = np.mean(norms, axis=0)
    slacks = mean_norms[1:] - alphas * mean_norms[:-1]
    state.primal = state.primal.replace(
        state.primal_optimizer.step(
            state.primal.tensors, _finalize(grads, cfg), cfg.lr_primal
        )
    )

    if cfg.constraints:
        state.meta.mu = np.maximum(state.meta.mu + cfg.meta_lr_primal * slacks, 0.0)

    state.step += 1
    return state, StepMetrics(
        loss, slacks, float(np.linalg.norm(state.meta.mu)), float(np.linalg.norm(state.meta.nu))
    )


class DualGradients(NamedTuple):
    """Averaged gradients of the dual training objective."""

    dual: dict[str, np.ndarray]
    primal: dict[str, np.ndarray]
    loss: float
    slacks: np.ndarray


def dual_gradients(batch: Batch, state: TrainState, cfg: TrainConfig) -> DualGradients:
    """Returns the gradients of -L(x_L, λ_L) plus the ascent constraint terms.
    The primal network enters as constants.
    """

    layers = state.dual.arch.layers
    betas = cfg.ascent_rates(layers)
    weight = 1.0 / len(batch)
    dual_grads, primal_grads, losses, norms = {}, {}, [], []

    for _, z in batch:
        tape = Tape()
        bound_dual = state.dual.bind(tape)
        bound_primal = state.primal.bind()
        x0 = draw_primal_start(state.rng, z.n, layers + 1)
        lam0 = draw_dual_start(state.rng, z.rows)
        trajectory = coupled_forward(z, bound_primal, bound_dual, x0, lam0)
        violations = [l2norm(constraint_values(x, z)) for x in trajectory.primal_outer]
        lagrange = lagrangian(trajectory.x_final, trajectory.lambda_final, z)
        objective = -lagrange

        if cfg.constraints:
            for l, (nu, beta) in enumerate(zip(state.meta.nu, betas), start=1):
                objective = objective + scale(
                    violations[l] - scale(violations[l - 1], beta), nu
                )

        grads = backward(
            objective, [*bound_dual.tensors.values(), *bound_primal.tensors.values()]
        )
        _accumulate(
            dual_grads,
            {name: grads[tensor] for name, tensor in bound_dual.tensors.items()},
            weight,
        )
        _accumulate(
            primal_grads,
            {name: grads[tensor] for name, tensor in bound_primal.tensors.items()},
            weight,
        )
        losses.append(-lagrange.item())
        norms.append([violation.item() for violation in violations])

    mean_norms = np.mean(norms, axis=0)
    slacks = mean_norms[1:] - betas * mean_norms[:-1]
    return DualGradients(dual_grads, primal_grads, float(np.mean(losses)), slacks)


def dual_training_step(
    batch: Batch, state: TrainState, cfg: TrainConfig
) -> tuple[TrainState, StepMetrics]:
    """One step of dual training with ascent constraints.
    The state is updated in place and returned.
    """

    result = dual_gradients(batch, state, cfg)
    _check_finite(result.loss, state, "dual")
    state.dual = state.dual.replace(
        state.dual_optimizer.step(
            state.dual.tensors, _finalize(result.dual, cfg), cfg.lr_dual
        )
    )

    if cfg.constraints:
        state.meta.nu = np.maximum(state.meta.nu + cfg.meta_lr_dual * result.slacks, 0.0)

    state.step += 1
    return state, StepMetrics(
        result.loss,
        result.slacks,
        float(np.linalg.norm(state.meta.mu)),
        float(np.linalg.norm(state.meta.nu)),
    )


def alternate_train(
    train_set: Sequence[RelaxedQP],
    cfg: TrainConfig,
    state: TrainState,
    *,
    checkpoint_dir: Optional[Path] = None,
    log: Optional[Callable[[LogRow], None]] = None,
) -> tuple[TrainState, list[LogRow]]:
    """Alternates dual and primal training for the configured rounds,
    starting from the round recorded in the state.
    """

    if not train_set:
        raise ContractError("The training set is empty.")

    instances = list(enumerate(train_set))
    batcher = Batcher(cfg.batch_instances)
    rows = []
    started = perf_counter()

    def emit(phase: Phase, epoch: int, metrics: StepMetrics) -> None:
        wallclock = (perf_counter() - started) * 1000 if cfg.record_wallclock else 0.0
        row = LogRow(
            state.round,
            phase,
            epoch,
            state.step,
            metrics.loss,
            metrics.mean_slack,
            metrics.mu_norm,
            metrics.nu_norm,
            wallclock,
        )
        rows.append(row)

        if log is not None:
            log(row)

    def run_phase(phase: Phase, epochs: int, step: Callable) -> None:
        state.phase = phase

        for epoch in range(epochs):
            losses = []

            for batch in batcher(instances, state.rng):
                _, metrics = step(batch)
                emit(phase, epoch, metrics)
                losses.append(metrics.loss)

            state.epoch += 1
            LOGGER.info(
                "Round %i, %s epoch %i: mean loss %.6g, |mu| %.4g, |nu| %.4g.",
                state.round,
                phase,
                epoch,
                float(np.mean(losses)),
                np.linalg.norm(state.meta.mu),
                np.linalg.norm(state.meta.nu),
            )

    while state.round < cfg.rounds:
        if cfg.reset_meta_duals:
            state.meta = MetaDuals.zeros(state.primal.arch.layers, state.dual.arch.layers)

        run_phase(
            "dual", cfg.dual_epochs, lambda batch: dual_training_step(batch, state, cfg)
        )
        pool = collect_multiplier_pool(state.primal, state.dual, instances, state.rng)
        LOGGER.info(
            "Round %i: rebuilt the multiplier pool with %i entries.", state.round, len(pool)
        )
        run_phase(
            "primal",
            cfg.primal_epochs,
            lambda batch: primal_training_step(batch, pool, state, cfg),
        )
        state.round += 1

        if checkpoint_dir is not None:
            path = Path(checkpoint_dir) / f"round-{state.round:03d}.json"
            save_checkpoint(path, state.to_checkpoint())
            LOGGER.info("Wrote checkpoint %s.", path)

    return state, rows
