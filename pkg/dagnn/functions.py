"""Convenience functions for parsing values, seeding and fanning out work."""

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar, Union

import numpy as np


__all__ = ["AXIS_CODES", "derive_rng", "get_bool", "parallel_map", "split_ratio"]


AXIS_CODES = {"n": 0, "m": 1, "r": 2}
TRUE_WORDS = frozenset({"1", "on", "true", "y", "yes"})
FALSE_WORDS = frozenset({"0", "off", "false", "n", "no"})
T = TypeVar("T")
R = TypeVar("R")


def get_bool(value: Union[str, bool, int]) -> bool:
    """Interprets a YAML, override or command line switch value."""

    if isinstance(value, (bool, np.bool_)):
        return bool(value)

    if isinstance(value, (int, np.integer)):
        return value != 0

    if (word := str(value).strip().casefold()) in TRUE_WORDS:
        return True

    if word in FALSE_WORDS:
        return False

    raise ValueError(f"not a boolean: {value!r}")


def derive_rng(*keys: Union[int, str]) -> np.random.Generator:
    """Returns a generator seeded by the given key path.
    String keys must be sweep axis names.
    """

    entropy = [AXIS_CODES[key] if isinstance(key, str) else int(key) for key in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def split_ratio(ratio: str) -> tuple[int, int]:
    """Parses a train:test ratio such as 2:1."""

    try:
        train, test = (int(part) for part in ratio.split(":"))
    except ValueError:
        raise ValueError("Not a train:test ratio:", ratio) from None

    if train <= 0 or test < 0:
        raise ValueError("Not a train:test ratio:", ratio)

    return train, test


def parallel_map(function: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """Maps the function over the items, in order.
    With more than one job the work is spread over worker processes.
    """

    if jobs <= 1:
        return [function(item) for item in items]

    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(function, items))
