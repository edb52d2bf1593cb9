"""Run configuration: YAML files, dotted overrides and run directories."""

from __future__ import annotations
from dataclasses import dataclass, field, fields, is_dataclass, replace
from datetime import datetime
from hashlib import sha256
from json import dumps
from logging import getLogger
from os import getenv
from pathlib import Path
from typing import (
    Any,
    Literal,
    Mapping,
    NamedTuple,
    Optional,
    Union,
    get_args,
    get_origin,
    get_type_hints,
)

import yaml

from dagnn.evaluation import EvalConfig, SweepSpec
from dagnn.exceptions import ConfigError, DataError
from dagnn.functions import get_bool
from dagnn.gnn import ModelConfig
from dagnn.oracle import DAConfig
from dagnn.problem import InstanceDistributionConfig
from dagnn.training import TrainConfig


__all__ = [
    "RUN_ROOT_ENV",
    "SEEDED_SECTIONS",
    "PathsConfig",
    "RunConfig",
    "RunDirectory",
    "fingerprint",
    "make_run_dir",
    "parse_config",
    "parse_override",
    "snapshot",
]


LOGGER = getLogger("dagnn.config")
RUN_ROOT_ENV = "DAGNN_RUN_ROOT"
SEEDED_SECTIONS = ("problem", "training", "eval")


@dataclass(frozen=True)
class PathsConfig:
    """Default locations of datasets and runs."""

    data: str = "data"
    run_root: str = field(default_factory=lambda: getenv(RUN_ROOT_ENV, "runs"))
    tag: str = "run"

    def validate(self, path: str = "paths") -> None:
        """Raises a ConfigError on invalid values."""
        if not self.tag or "/" in self.tag:
            raise ConfigError(f"{path}.tag", "must be a non-empty file name")


@dataclass(frozen=True)
class RunConfig:
    """The resolved configuration of a run."""

    problem: InstanceDistributionConfig = field(default_factory=InstanceDistributionConfig)
    oracle: DAConfig = field(default_factory=DAConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    paths: PathsConfig = field(default_factory=PathsConfig)
    seed: int = 0
    jobs: int = 1

    def validate(self) -> None:
        """Validates every section."""
        for item in fields(self):
            if is_dataclass(value := getattr(self, item.name)):
                value.validate(item.name)

        if self.seed < 0:
            raise ConfigError("seed", "must not be negative")

        if self.jobs < 1:
            raise ConfigError("jobs", "must be at least 1")

    def to_json(self) -> dict:
        """Returns a JSON-ish dict of all fields."""
        return _to_json(self)


def _to_json(value: Any) -> Any:
    """Converts dataclasses and tuples recursively."""

    if is_dataclass(value):
        return {item.name: _to_json(getattr(value, item.name)) for item in fields(value)}

    if isinstance(value, (list, tuple)):
        return [_to_json(item) for item in value]

    return value


def _coerce(value: Any, hint: Any, path: str) -> Any:
    """Converts a raw value to the annotated type."""

    origin, args = get_origin(hint), get_args(hint)

    if origin is Union:
        if value is None or (isinstance(value, str) and value.casefold() in {"none", "null"}):
            if type(None) in args:
                return None

        return _coerce(value, next(arg for arg in args if arg is not type(None)), path)

    if origin is Literal:
        if value not in args:
            raise ConfigError(path, f"must be one of {', '.join(map(str, args))}")

        return value

    if origin is tuple:
        if isinstance(value, str):
            value = [item for item in value.split(",") if item.strip()]

        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, "expected a list")

        return tuple(
            _coerce(item, args[0], f"{path}[{index}]") for index, item in enumerate(value)
        )

    if hint is bool:
        try:
            return get_bool(value)
        except ValueError:
            raise ConfigError(path, f"expected a boolean, got {value!r}") from None

    if hint is int:
        if isinstance(value, bool) or isinstance(value, float) and not value.is_integer():
            raise ConfigError(path, f"expected an integer, got {value!r}")

        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(path, f"expected an integer, got {value!r}") from None

    if hint is float:
        if isinstance(value, bool):
            raise ConfigError(path, f"expected a number, got {value!r}")

        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(path, f"expected a number, got {value!r}") from None

    if hint is str:
        if isinstance(value, (dict, list)):
            raise ConfigError(path, f"expected a string, got {value!r}")

        return str(value)

    return value


def _build(cls: type, raw: Mapping, path: str = "") -> Any:
    """Builds a dataclass from a mapping, rejecting unknown keys."""

    if not isinstance(raw, Mapping):
        raise ConfigError(path or "<root>", "expected a mapping")

    hints = get_type_hints(cls)
    known = {item.name for item in fields(cls)}

    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else str(key), "unknown key")

    values = {}

    for key, value in raw.items():
        dotted = f"{path}.{key}" if path else key

        if is_dataclass(hint := hints[key]):
            values[key] = _build(hint, value or {}, dotted)
        else:
            values[key] = _coerce(value, hint, dotted)

    return cls(**values)


def _merge(target: dict, key: str, value: Any) -> None:
    """Sets a dotted key in a nested dict."""

    *parents, leaf = key.split(".")

    for parent in parents:
        child = target.setdefault(parent, {})

        if not isinstance(child, dict):
            raise ConfigError(key, f"{parent} is not a section")

        target = child

    target[leaf] = value


def parse_override(override: str) -> tuple[str, Any]:
    """Parses KEY=VALUE, reading the value as YAML."""

    key, sep, value = override.partition("=")

    if not sep or not key.strip():
        raise ConfigError(override, "overrides must look like section.key=value")

    try:
        return key.strip(), yaml.safe_load(value) if value.strip() else ""
    except yaml.YAMLError:
        return key.strip(), value


def parse_config(
    path: Optional[Union[Path, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Merges defaults, the YAML file and dotted overrides, in that order.
    Sections without an explicit seed inherit the top-level seed.
    """

    raw = {}

    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise DataError(path, "No such file.") from None
        except OSError as error:
            raise DataError(path, f"Cannot read file: {error.strerror}.") from error

        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as error:
            raise ConfigError(str(path), f"invalid YAML: {error}") from None

        if not isinstance(raw, dict):
            raise ConfigError("<root>", "expected a mapping")

    for key, value in (overrides or {}).items():
        _merge(raw, key, value)

    config = _build(RunConfig, raw)
    seeded = {
        section: replace(getattr(config, section), seed=config.seed)
        for section in SEEDED_SECTIONS
        if "seed" not in (raw.get(section) or {})
    }
    config = replace(config, **seeded)
    config.validate()
    return config


def fingerprint(config: RunConfig) -> str:
    """Returns the SHA-256 of the canonical JSON form."""

    canonical = dumps(config.to_json(), sort_keys=True, separators=(",", ":"))
    return sha256(canonical.encode()).hexdigest()


def snapshot(config: RunConfig, path: Union[Path, str]) -> Path:
    """Writes the resolved configuration as YAML."""

    path = Path(path)

    try:
        path.write_text(yaml.safe_dump(config.to_json(), sort_keys=True), encoding="utf-8")
    except OSError as error:
        raise DataError(path, f"Cannot write file: {error.strerror}.") from error

    LOGGER.info("Wrote resolved configuration to %s.", path)
    return path


class RunDirectory(NamedTuple):
    """Layout of a run directory."""

    root: Path

    @property
    def config(self) -> Path:
        """Returns the configuration snapshot file."""
        return self.root / "config.yaml"

    @property
    def checkpoints(self) -> Path:
        """Returns the checkpoint directory."""
        return self.root / "checkpoints"

    @property
    def logs(self) -> Path:
        """Returns the log directory."""
        return self.root / "logs"

    @property
    def reports(self) -> Path:
        """Returns the report directory."""
        return self.root / "reports"


def make_run_dir(
    config: RunConfig,
    out: Optional[Union[Path, str]] = None,
    now: Optional[datetime] = None,
) -> RunDirectory:
    """Creates the run directory and writes the configuration snapshot.
    Without an explicit directory it is <run root>/<timestamp>-<tag>.
    """

    if out is None:
        stamp = (now or datetime.now()).strftime("%Y%m%dT%H%M%S")
        out = Path(config.paths.run_root) / f"{stamp}-{config.paths.tag}"

    run = RunDirectory(Path(out))

    try:
        for directory in (run.root, run.checkpoints, run.logs, run.reports):
            directory.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise DataError(out, f"Cannot create directory: {error.strerror}.") from error

    snapshot(config, run.config)
    return run
