"""Shared fixtures: tiny instances, small networks and seeded generators."""

import numpy as np
import pytest

from dagnn.gnn import DualParams, ModelConfig, PrimalParams, init_params
from dagnn.problem import InstanceDistributionConfig, generate_instance, relax
from dagnn.selftest import random_params


TINY = InstanceDistributionConfig(n=6, m=4, r=2, seed=0)
SMALL_MODEL = ModelConfig(primal_layers=3, dual_layers=2, sublayers=2, taps=1, features=4)


@pytest.fixture
def rng():
    """A fresh seeded generator."""

    return np.random.default_rng(1234)


@pytest.fixture
def tiny_instance():
    """An MIQP with n=6, m=4, r=2."""

    return generate_instance(TINY, np.random.default_rng(0))


@pytest.fixture
def tiny_problem(tiny_instance):
    """The relaxation of the tiny instance."""

    return relax(tiny_instance)


@pytest.fixture
def tiny_problems():
    """A handful of relaxed tiny instances."""

    return [
        relax(generate_instance(TINY, np.random.default_rng(seed))) for seed in range(4)
    ]


@pytest.fixture
def small_model():
    """Network dimensions small enough for finite differences."""

    return SMALL_MODEL


@pytest.fixture
def identity_params(small_model):
    """Freshly initialized primal and dual parameters."""

    rng = np.random.default_rng(7)
    return (
        init_params(rng, small_model.primal(), PrimalParams),
        init_params(rng, small_model.dual(), DualParams),
    )


@pytest.fixture
def random_networks(small_model):
    """Primal and dual parameters with nonzero readouts."""

    rng = np.random.default_rng(11)
    return (
        random_params(rng, small_model, PrimalParams),
        random_params(rng, small_model, DualParams),
    )
