"""Layerwise descent curves, test metrics and out-of-distribution sweeps."""

from __future__ import annotations
from dataclasses import dataclass, replace
from logging import getLogger
from time import perf_counter
from typing import NamedTuple, Optional, Sequence

import numpy as np

from dagnn.exceptions import ConfigError, DataError
from dagnn.functions import derive_rng, parallel_map
from dagnn.gnn import (
    DualParams,
    PrimalParams,
    Trajectory,
    coupled_forward,
    draw_dual_start,
    draw_primal_start,
)
from dagnn.oracle import DAConfig, OracleSolution, dual_ascent
from dagnn.problem import (
    InstanceDistributionConfig,
    RelaxedQP,
    generate_instance,
    grad_x_lagrangian,
    lagrangian,
    objective,
    relax,
)
from dagnn.types import Axis, LayerStat


__all__ = [
    "DEFAULT_GRIDS",
    "EvalConfig",
    "LatencyReport",
    "LayerwiseReport",
    "Model",
    "SweepRow",
    "SweepSpec",
    "TestMetrics",
    "evaluation_start",
    "layerwise_metrics",
    "measure_latency",
    "ood_sweep",
    "run_model",
    "test_metrics",
]


LOGGER = getLogger("dagnn.evaluation")
DEFAULT_GRIDS = {
    "n": (40, 60, 80, 100, 120),
    "m": (25, 35, 45, 55, 65),
    "r": (0, 5, 10, 15, 20),
}


@dataclass(frozen=True)
class EvalConfig:
    """Evaluation seeds and switches."""

    seed: int = 0
    latency: bool = True

    def validate(self, path: str = "eval") -> None:
        """Raises a ConfigError on invalid values."""
        if self.seed < 0:
            raise ConfigError(f"{path}.seed", "must not be negative")


@dataclass(frozen=True)
class SweepSpec:
    """A one-axis out-of-distribution sweep.
    The other two axes stay at the problem configuration's values.
    An empty grid selects the default grid of the axis.
    """

    axis: Axis = "r"
    grid: tuple[int, ...] = ()
    count: int = 100
    max_resample: int = 10

    @property
    def values(self) -> tuple[int, ...]:
        """Returns the grid values."""
        return tuple(self.grid) or DEFAULT_GRIDS[self.axis]

    def validate(self, path: str = "sweep") -> None:
        """Raises a ConfigError on invalid values."""
        if self.axis not in DEFAULT_GRIDS:
            raise ConfigError(f"{path}.axis", "must be one of n, m, r")

        if self.count < 1:
            raise ConfigError(f"{path}.count", "must be at least 1")

        if self.max_resample < 0:
            raise ConfigError(f"{path}.max_resample", "must not be negative")

        if any(value < 0 for value in self.values):
            raise ConfigError(f"{path}.grid", "values must not be negative")


class Model(NamedTuple):
    """A named pair of trained networks."""

    name: str
    primal: PrimalParams
    dual: DualParams


class LayerwiseReport(NamedTuple):
    """Per-layer means over a test set."""

    gradnorm: list[LayerStat]
    violation: list[LayerStat]
    slackness: list[LayerStat]


class TestMetrics(NamedTuple):
    """Optimality and feasibility of the final iterates."""

    __test__ = False

    mse_x: float
    sse_x: float
    mean_violation: float
    mse_lambda: float
    duality_gap_proxy: float
    instances: int

    def to_json(self) -> dict:
        """Returns a JSON representation of the metrics."""
        return {
            "mseX": self.mse_x,
            "sseX": self.sse_x,
            "meanViolation": self.mean_violation,
            "mseLambda": self.mse_lambda,
            "dualityGapProxy": self.duality_gap_proxy,
            "instances": self.instances,
        }


class LatencyReport(NamedTuple):
    """Mean wallclock per instance in milliseconds."""

    network_ms: float
    oracle_ms: float
    instances: int

    def to_json(self) -> dict:
        """Returns a JSON representation of the report."""
        return {
            "networkMs": self.network_ms,
            "oracleMs": self.oracle_ms,
            "instances": self.instances,
        }


class SweepRow(NamedTuple):
    """Metrics of one model at one grid point."""

    axis: str
    value: int
    model: str
    metrics: TestMetrics


def evaluation_start(seed: int, index: int, z: RelaxedQP) -> tuple[np.ndarray, np.ndarray]:
    """Returns the fixed x̃_0 and λ_0 of a test instance.
    The same x̃_0 is used for every primal query.
    """

    rng = derive_rng(seed, index)
    return draw_primal_start(rng, z.n), draw_dual_start(rng, z.rows)


def run_model(model: Model, z: RelaxedQP, seed: int, index: int) -> Trajectory:
    """Runs the coupled networks with evaluation start points."""

    x0, lam0 = evaluation_start(seed, index, z)
    return coupled_forward(z, model.primal, model.dual, x0, lam0)


def mean_violation(values: np.ndarray) -> float:
    """Returns the mean positive part of the constraint values."""

    return float(np.mean(np.maximum(values, 0.0))) if values.size else 0.0


def _stats(samples: np.ndarray) -> list[LayerStat]:
    """Aggregates an instances × layers array."""

    count = samples.shape[0]
    means = samples.mean(axis=0)
    errors = (
        samples.std(axis=0, ddof=1) / np.sqrt(count)
        if count > 1
        else np.zeros(samples.shape[1])
    )
    return [
        LayerStat(layer, float(mean), float(error))
        for layer, (mean, error) in enumerate(zip(means, errors))
    ]


def _layerwise_sample(job: tuple[Model, RelaxedQP, int, int]) -> tuple[list, list, list]:
    """Evaluates the three curves on one instance."""

    model, z, seed, index = job
    trajectory = run_model(model, z, seed, index)
    lam_final = trajectory.lambda_final.vector()
    gradnorm = [
        float(np.linalg.norm(grad_x_lagrangian(x, lam_final, z).data))
        for x in trajectory.primal_inner[-1]
    ]
    violation, slackness = [], []

    for x in trajectory.primal_outer:
        values = z.A @ x.vector() - z.b
        violation.append(mean_violation(values))
        slackness.append(float(lam_final @ values))

    return gradnorm, violation, slackness


def layerwise_metrics(
    model: Model, test_set: Sequence[RelaxedQP], seed: int = 0, *, jobs: int = 1
) -> LayerwiseReport:
    """Averages ∥∇ₓL∥ over the primal layers of the final query and
    violation and slackness over the dual layers.
    """

    if not test_set:
        raise ConfigError("eval", "the test set is empty")

    samples = parallel_map(
        _layerwise_sample,
        [(model, z, seed, index) for index, z in enumerate(test_set)],
        jobs,
    )
    gradnorm, violation, slackness = (
        np.array([sample[part] for sample in samples]) for part in range(3)
    )
    return LayerwiseReport(_stats(gradnorm), _stats(violation), _stats(slackness))


def _test_sample(
    job: tuple[Model, RelaxedQP, OracleSolution, int, int]
) -> tuple[float, float, float, float]:
    """Returns squared errors, violation and gap of one instance."""

    model, z, solution, seed, index = job
    trajectory = run_model(model, z, seed, index)
    x, lam = trajectory.x_final.vector(), trajectory.lambda_final.vector()
    gap = abs(
        lagrangian(x, lam, z).item() - objective(solution.x_star, z).item()
    )
    return (
        float(np.sum((x - solution.x_star) ** 2)),
        mean_violation(z.A @ x - z.b),
        float(np.sum((lam - solution.lambda_star) ** 2)),
        gap,
    )


def test_metrics(
    model: Model,
    test_set: Sequence[tuple[str, RelaxedQP, Optional[OracleSolution]]],
    seed: int = 0,
    *,
    jobs: int = 1,
) -> TestMetrics:
    """Compares the final iterates against the oracle solutions."""

    if not test_set:
        raise ConfigError("eval", "the test set is empty")

    for name, _, solution in test_set:
        if solution is None:
            raise DataError(name, "No oracle solution for this instance.")

        if not solution.converged:
            raise DataError(name, "The oracle solution did not converge.")

    samples = parallel_map(
        _test_sample,
        [
            (model, z, solution, seed, index)
            for index, (_, z, solution) in enumerate(test_set)
        ],
        jobs,
    )
    sizes = [(z.n, z.rows) for _, z, _ in test_set]
    mse_x = np.mean([sse / n for (sse, *_), (n, _) in zip(samples, sizes)])
    mse_lambda = np.mean(
        [sse / rows if rows else 0.0 for (_, _, sse, _), (_, rows) in zip(samples, sizes)]
    )
    return TestMetrics(
        mse_x=float(mse_x),
        sse_x=float(np.mean([sample[0] for sample in samples])),
        mean_violation=float(np.mean([sample[1] for sample in samples])),
        mse_lambda=float(mse_lambda),
        duality_gap_proxy=float(np.mean([sample[3] for sample in samples])),
        instances=len(samples),
    )


def measure_latency(
    model: Model,
    test_set: Sequence[RelaxedQP],
    oracle: DAConfig = DAConfig(),
    seed: int = 0,
) -> LatencyReport:
    """Times one coupled forward pass against one dual ascent solve."""

    if not test_set:
        raise ConfigError("eval", "the test set is empty")

    network = oracle_time = 0.0

    for index, z in enumerate(test_set):
        start = perf_counter()
        run_model(model, z, seed, index)
        network += perf_counter() - start
        start = perf_counter()
        dual_ascent(z, oracle)
        oracle_time += perf_counter() - start

    count = len(test_set)
    return LatencyReport(network / count * 1000, oracle_time / count * 1000, count)


def _sweep_instance(
    job: tuple[InstanceDistributionConfig, DAConfig, int, str, int, int, int]
) -> Optional[tuple[RelaxedQP, OracleSolution]]:
    """Draws and solves one sweep instance, resampling on failure."""

    cfg, oracle, master, axis, value, index, max_resample = job

    for attempt in range(max_resample + 1):
        keys = (master, axis, value, index) + ((attempt,) if attempt else ())
        z = relax(generate_instance(cfg, derive_rng(*keys)))

        if (solution := dual_ascent(z, oracle)).converged:
            return z, solution

    return None


def ood_sweep(
    spec: SweepSpec,
    models: Sequence[Model],
    problem: InstanceDistributionConfig = InstanceDistributionConfig(),
    oracle: DAConfig = DAConfig(),
    *,
    master_seed: int = 0,
    eval_seed: int = 0,
    jobs: int = 1,
) -> list[SweepRow]:
    """Evaluates every model on fresh instances at each grid point."""

    rows = []

    for value in spec.values:
        cfg = replace(problem, **{spec.axis: value})
        cfg.validate(f"sweep.{spec.axis}")
        drawn = parallel_map(
            _sweep_instance,
            [
                (cfg, oracle, master_seed, spec.axis, value, index, spec.max_resample)
                for index in range(spec.count)
            ],
            jobs,
        )
        test_set = []

        for index, item in enumerate(drawn):
            if item is None:
                LOGGER.warning(
                    "Skipping %s=%i instance %i: oracle did not converge.",
                    spec.axis,
                    value,
                    index,
                )
            else:
                test_set.append((f"{spec.axis}={value}#{index}", *item))

        if not test_set:
            LOGGER.warning("No usable instances at %s=%i.", spec.axis, value)
            continue

        for model in models:
            metrics = test_metrics(model, test_set, eval_seed, jobs=jobs)
            rows.append(SweepRow(spec.axis, value, model.name, metrics))
            LOGGER.info(
                "%s=%i, %s: mseX %.4g, violation %.4g.",
                spec.axis,
                value,
                model.name,
                metrics.mse_x,
                metrics.mean_violation,
            )

    return rows
