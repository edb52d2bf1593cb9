"""JSON parsing and serialization."""

from json import JSONDecodeError, dumps, loads
from pathlib import Path
from typing import Any, Union

import numpy as np

from dagnn.exceptions import DataError


__all__ = ["View", "dump_json", "jsonify", "load_json", "object_to_json"]


class View(dict):
    """Maps attribute names to JSON keys.
    A key of None keeps the attribute name.
    """

    def __call__(self, record: object) -> dict[str, Any]:
        """Returns the JSON object of the record."""
        return {
            key or attribute: object_to_json(getattr(record, attribute))
            for attribute, key in self.items()
        }


def object_to_json(obj: object) -> object:
    """Encodes the object into a JSON-ish value."""

    if isinstance(obj, np.ndarray):
        return obj.tolist()

    if isinstance(obj, np.generic):
        return obj.item()

    if isinstance(obj, Path):
        return str(obj)

    if hasattr(obj, "to_json"):
        return obj.to_json()

    return obj


def jsonify(obj: object, indent: int = None) -> str:
    """Overrides json.dumps.
    Floats are written in their shortest round-trip form,
    so arrays survive a dump/load cycle bit-exactly.
    """

    return dumps(obj, default=object_to_json, indent=indent, allow_nan=False)


def dump_json(path: Union[Path, str], obj: object, indent: int = 1) -> None:
    """Writes the object as JSON to the given file."""

    try:
        Path(path).write_text(jsonify(obj, indent=indent) + "\n", encoding="utf-8")
    except OSError as error:
        raise DataError(path, f"Cannot write file: {error.strerror}.") from error


def load_json(path: Union[Path, str]) -> Any:
    """Reads a JSON file."""

    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(path, "No such file.") from None
    except OSError as error:
        raise DataError(path, f"Cannot read file: {error.strerror}.") from error

    try:
        return loads(text)
    except JSONDecodeError as error:
        raise DataError(path, f"Invalid JSON: {error.msg}.") from None
