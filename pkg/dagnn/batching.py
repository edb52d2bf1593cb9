"""Mini-batching of training instances."""

from itertools import islice
from typing import Iterator, NamedTuple, Sequence, TypeVar

import numpy as np


__all__ = ["BatchInfo", "Batcher"]


T = TypeVar("T")


class BatchInfo(NamedTuple):
    """Represents batch count information."""

    full_batches: int
    remainder: int

    @property
    def batches(self) -> int:
        """Returns the amount of batches to be expected."""
        return self.full_batches + (self.remainder > 0)

    def to_json(self) -> dict:
        """Returns a JSON representation of the batch information."""
        return {
            "fullBatches": self.full_batches,
            "remainder": self.remainder,
            "batches": self.batches,
        }


class Batcher:
    """Shuffles and splits a sequence into batches."""

    def __init__(self, size: int, *, shuffle: bool = True):
        self.size = size
        self.shuffle = shuffle

    def __call__(self, items: Sequence[T], rng: np.random.Generator) -> Iterator[list[T]]:
        """Yields the batches of one epoch."""
        order = rng.permutation(len(items)) if self.shuffle else range(len(items))
        indices = iter(order)

        while batch := [items[index] for index in islice(indices, self.size)]:
            yield batch

    def info(self, items: Sequence) -> BatchInfo:
        """Counts the amount of batches."""
        return BatchInfo(*divmod(len(items), self.size))
