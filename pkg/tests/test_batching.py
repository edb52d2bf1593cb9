"""Tests of mini-batching."""

import numpy as np

from dagnn.batching import BatchInfo, Batcher


def test_batches_cover_every_item_once():
    batches = list(Batcher(3)(list(range(10)), np.random.default_rng(0)))
    assert [len(batch) for batch in batches] == [3, 3, 3, 1]
    assert sorted(item for batch in batches for item in batch) == list(range(10))


def test_shuffling_follows_the_generator():
    items = list(range(20))
    first = list(Batcher(4)(items, np.random.default_rng(5)))
    second = list(Batcher(4)(items, np.random.default_rng(5)))
    assert first == second


def test_unshuffled_batches_keep_order():
    assert list(Batcher(2, shuffle=False)("abcde", np.random.default_rng(0))) == [
        ["a", "b"],
        ["c", "d"],
        ["e"],
    ]


def test_batch_info():
    info = Batcher(4).info(range(10))
    assert info == BatchInfo(2, 2)
    assert info.batches == 3
    assert info.to_json() == {"fullBatches": 2, "remainder": 2, "batches": 3}


def test_empty_input_yields_nothing():
    assert not list(Batcher(4)([], np.random.default_rng(0)))
