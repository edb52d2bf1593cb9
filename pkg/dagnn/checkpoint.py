"""Checkpoint files."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from dagnn.exceptions import DataError
from dagnn.gnn import DualParams, PrimalParams
from dagnn.json import dump_json, load_json


__all__ = ["FORMAT", "Checkpoint", "load_checkpoint", "save_checkpoint"]


FORMAT = "dagnn-checkpoint/1"
NORM_SCALE = "spectral-norm"


@dataclass
class Checkpoint:
    """Network parameters plus training bookkeeping."""

    primal: PrimalParams
    dual: DualParams
    seed: int = 0
    counters: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        """Returns a JSON representation of the checkpoint."""
        return {
            "format": FORMAT,
            "architecture": {
                "primal": self.primal.arch.to_json(),
                "dual": self.dual.arch.to_json(),
            },
            "normScale": NORM_SCALE,
            "seed": self.seed,
            "counters": self.counters,
            "primal": self.primal.to_json(),
            "dual": self.dual.to_json(),
            "extras": self.extras,
        }


def save_checkpoint(path: Union[Path, str], checkpoint: Checkpoint) -> None:
    """Writes a checkpoint file."""

    dump_json(path, checkpoint.to_json(), indent=None)


def load_checkpoint(path: Union[Path, str]) -> Checkpoint:
    """Reads a checkpoint file."""

    json = load_json(path)

    if not isinstance(json, dict) or json.get("format") != FORMAT:
        raise DataError(path, "Not a checkpoint file.")

    try:
        return Checkpoint(
            primal=PrimalParams.from_json(json["primal"]),
            dual=DualParams.from_json(json["dual"]),
            seed=json.get("seed", 0),
            counters=json.get("counters", {}),
            extras=json.get("extras", {}),
        )
    except (KeyError, TypeError, ValueError) as error:
        raise DataError(path, f"Corrupt checkpoint: {error}.") from None
