"""Command line interface."""

from __future__ import annotations
from dataclasses import dataclass, field
from logging import DEBUG, INFO, WARNING, basicConfig, getLogger
from pathlib import Path
from sys import exit  # pylint: disable=W0622
from typing import Any, Callable, Optional

import click

from dagnn.checkpoint import load_checkpoint, save_checkpoint
from dagnn.config import (
    RunConfig,
    fingerprint,
    make_run_dir,
    parse_config,
    parse_override,
    snapshot,
)
from dagnn.dataset import Manifest, build_dataset, load_split, solve_dataset
from dagnn.debug import dump_stacktrace
from dagnn.evaluation import (
    Model,
    layerwise_metrics,
    measure_latency,
    ood_sweep,
    test_metrics,
)
from dagnn.exceptions import ConfigError, DAGNNError, SelfTestFailure
from dagnn.functions import split_ratio
from dagnn.json import jsonify
from dagnn.report import TrainingLog, emit_report
from dagnn.selftest import run_selftest
from dagnn.training import TrainState, alternate_train


__all__ = ["cli", "handle_error", "main", "register_error_handler"]


LOGGER = getLogger("dagnn.cli")
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
ERROR_HANDLERS: dict[type, Callable[[Exception], int]] = {}


def register_error_handler(
    exception: type, handler: Callable[[Exception], int]
) -> None:
    """Registers a handler mapping an exception to an exit code."""

    ERROR_HANDLERS[exception] = handler


def handle_error(error: Exception) -> int:
    """Returns the exit code of the most specific registered handler."""

    for cls in type(error).__mro__:
        if (handler := ERROR_HANDLERS.get(cls)) is not None:
            return handler(error)

    return dump_stacktrace()


def _report(error: DAGNNError) -> int:
    LOGGER.error("%s", error)
    return error.exit_code


def _usage(error: click.ClickException) -> int:
    error.show()
    return 1


register_error_handler(DAGNNError, _report)
register_error_handler(click.ClickException, _usage)
register_error_handler(click.Abort, lambda _: 1)


@dataclass
class Session:
    """Options shared by all commands."""

    config: Optional[Path] = None
    out: Optional[Path] = None
    overrides: dict[str, Any] = field(default_factory=dict)

    def resolve(self, **shortcuts: Any) -> RunConfig:
        """Returns the configuration with the shortcut overrides applied.
        Shortcuts given as None are ignored.
        """
        overrides = dict(self.overrides)
        overrides.update(
            {key: value for key, value in shortcuts.items() if value is not None}
        )
        return parse_config(self.config, overrides)


def _overrides(pairs: tuple[str, ...]) -> dict[str, Any]:
    return dict(parse_override(pair) for pair in pairs)


@click.group()
@click.option("--config", "config_file", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--seed", type=click.IntRange(min=0), help="Master seed.")
@click.option("--jobs", type=click.IntRange(min=1), help="Worker processes.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path))
@click.option("--set", "pairs", multiple=True, metavar="KEY=VALUE")
@click.option("-v", "--verbose", is_flag=True)
@click.option("--quiet", is_flag=True)
@click.pass_context
def cli(ctx, config_file, seed, jobs, out, pairs, verbose, quiet):
    """Unrolled primal/dual graph networks for relaxed MIQPs."""

    basicConfig(
        level=DEBUG if verbose else WARNING if quiet else INFO, format=LOG_FORMAT
    )
    overrides = _overrides(pairs)

    if seed is not None:
        overrides["seed"] = seed

    if jobs is not None:
        overrides["jobs"] = jobs

    ctx.obj = Session(config_file, out, overrides)


def _problem_shortcuts(n, m, r) -> dict[str, Optional[int]]:
    return {"problem.n": n, "problem.m": m, "problem.r": r}


def _data_dir(session: Session, config: RunConfig, data: Optional[Path]) -> Path:
    return Path(data or session.out or config.paths.data)


@cli.command()
@click.option("--n", type=int)
@click.option("--m", type=int)
@click.option("--r", type=int)
@click.option("--count", type=click.IntRange(min=1), default=800, show_default=True)
@click.option("--split", "ratio", default="2:1", show_default=True)
@click.pass_obj
def generate(session: Session, n, m, r, count, ratio):
    """Generate a dataset of instances and its manifest."""

    config = session.resolve(**_problem_shortcuts(n, m, r))

    try:
        train, test = split_ratio(ratio)
    except ValueError:
        raise ConfigError("split", f"not a train:test ratio: {ratio!r}") from None

    root = _data_dir(session, config, None)
    root.mkdir(parents=True, exist_ok=True)
    build_dataset(root, config.problem, count, count * test // train, jobs=config.jobs)
    snapshot(config, root / "config.yaml")


@cli.command()
@click.option("--data", type=click.Path(file_okay=False, path_type=Path))
@click.pass_obj
def solve(session: Session, data):
    """Solve every instance with dual ascent."""

    config = session.resolve()
    manifest = Manifest.load(_data_dir(session, config, data))
    report = solve_dataset(manifest, config.oracle, jobs=config.jobs)
    click.echo(jsonify(report.to_json(), indent=2))


def _train_set(manifest: Manifest) -> list:
    return [item.relaxed for item in load_split(manifest, "train")]


@cli.command()
@click.option("--data", type=click.Path(file_okay=False, path_type=Path))
@click.option("--constraints", type=click.Choice(["on", "off"]))
@click.option("--rounds", type=click.IntRange(min=0))
@click.option("--resume", type=click.Path(dir_okay=False, path_type=Path))
@click.pass_obj
def train(session: Session, data, constraints, rounds, resume):
    """Train the primal and dual networks."""

    config = session.resolve(
        **{"training.constraints": constraints, "training.rounds": rounds}
    )
    train_set = _train_set(Manifest.load(Path(data or config.paths.data)))

    if not train_set:
        raise ConfigError("data", "the training split is empty")

    run = make_run_dir(config, session.out)

    if resume is None:
        first = train_set[0]
        state = TrainState.initial(config.model, config.training, first.n, first.rows)
    else:
        state = TrainState.from_checkpoint(load_checkpoint(resume))

    state, _ = alternate_train(
        train_set,
        config.training,
        state,
        checkpoint_dir=run.checkpoints,
        log=TrainingLog(run.logs / "train.csv"),
    )
    save_checkpoint(run.checkpoints / "final.json", state.to_checkpoint())
    LOGGER.info("Training finished, run directory %s.", run.root)


def _models(pairs: tuple[str, ...]) -> list[Model]:
    models = []

    for pair in pairs:
        name, sep, path = pair.partition("=")

        if not sep or not name or not path:
            raise ConfigError("model", f"expected NAME=PATH, got {pair!r}")

        checkpoint = load_checkpoint(path)
        models.append(Model(name, checkpoint.primal, checkpoint.dual))

    return models


def _summary(config: RunConfig, pairs: tuple[str, ...], **extra: Any) -> dict:
    return {
        "config": config.to_json(),
        "fingerprint": fingerprint(config),
        "seeds": {
            "master": config.seed,
            "problem": config.problem.seed,
            "training": config.training.seed,
            "eval": config.eval.seed,
        },
        "checkpoints": dict(pair.partition("=")[::2] for pair in pairs),
        **extra,
    }


@cli.command(name="eval")
@click.option("--data", type=click.Path(file_okay=False, path_type=Path))
@click.option("--model", "pairs", multiple=True, required=True, metavar="NAME=PATH")
@click.pass_obj
def evaluate(session: Session, data, pairs):
    """Evaluate checkpoints on the test split."""

    config = session.resolve()
    models = _models(pairs)
    test_set = load_split(
        Manifest.load(Path(data or config.paths.data)), "test", solutions=True
    )
    labeled = [(item.name, item.relaxed, item.solution) for item in test_set]
    relaxed = [item.relaxed for item in test_set]
    seed, jobs = config.eval.seed, config.jobs
    layerwise = {
        model.name: layerwise_metrics(model, relaxed, seed, jobs=jobs) for model in models
    }
    metrics = {model.name: test_metrics(model, labeled, seed, jobs=jobs) for model in models}
    extra = {}

    if config.eval.latency:
        extra["latency"] = {
            model.name: measure_latency(model, relaxed, config.oracle, seed).to_json()
            for model in models
        }

    run = make_run_dir(config, session.out)
    emit_report(
        run.reports,
        layerwise=layerwise,
        metrics=metrics,
        summary=_summary(config, pairs, **extra),
    )


@cli.command()
@click.option("--model", "pairs", multiple=True, required=True, metavar="NAME=PATH")
@click.option("--axis", type=click.Choice(["n", "m", "r"]))
@click.option("--grid", help="Comma-separated grid values.")
@click.option("--count", type=click.IntRange(min=1))
@click.option("--n", type=int)
@click.option("--m", type=int)
@click.option("--r", type=int)
@click.pass_obj
def sweep(session: Session, pairs, axis, grid, count, n, m, r):
    """Evaluate checkpoints on shifted instance distributions."""

    config = session.resolve(
        **{"sweep.axis": axis, "sweep.grid": grid, "sweep.count": count},
        **_problem_shortcuts(n, m, r),
    )
    rows = ood_sweep(
        config.sweep,
        _models(pairs),
        config.problem,
        config.oracle,
        master_seed=config.seed,
        eval_seed=config.eval.seed,
        jobs=config.jobs,
    )
    run = make_run_dir(config, session.out)
    emit_report(run.reports, sweeps=rows, summary=_summary(config, pairs))


@cli.command()
@click.option("--seeds", type=click.IntRange(min=1), default=3, show_default=True)
def check(seeds):
    """Run the invariant self-tests."""

    results = run_selftest(seeds)

    for result in results:
        click.echo(f"{'ok  ' if result.passed else 'FAIL'} {result.name}: {result.detail}")

    if failures := [result.name for result in results if not result.passed]:
        raise SelfTestFailure(failures)


def main(argv: Optional[list[str]] = None) -> None:
    """Runs the command line interface and exits with its status."""

    try:
        cli.main(args=argv, prog_name="dagnn", standalone_mode=False)
    except Exception as error:  # pylint: disable=W0703
        exit(handle_error(error))

    exit(0)
