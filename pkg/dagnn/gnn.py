"""Unrolled primal and dual graph neural networks."""

from __future__ import annotations
from dataclasses import asdict, dataclass, field
from typing import ClassVar, Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np

from dagnn.autodiff import (
    Tape,
    Tensor,
    as_matrix,
    as_tensor,
    broadcast_rows,
    hstack,
    matmul,
    relu,
    rows,
    tanh,
    vstack,
)
from dagnn.exceptions import ConfigError, ContractError, DimensionError
from dagnn.problem import RelaxedQP


__all__ = [
    "Architecture",
    "BoundParams",
    "DualParams",
    "ModelConfig",
    "PrimalParams",
    "Trajectory",
    "UnrolledParams",
    "coupled_forward",
    "draw_dual_start",
    "draw_primal_start",
    "dual_layer",
    "graph_conv_sublayer",
    "init_params",
    "node_signal",
    "primal_forward",
    "primal_layer",
]


INPUT_FEATURES = 2
DUAL_START_HIGH = 0.1


@dataclass(frozen=True)
class Architecture:
    """Dimensions of one unrolled network.
    bias_size is only used with per-node biases.
    """

    layers: int
    sublayers: int = 3
    taps: int = 1
    features: int = 32
    per_node_bias: bool = False
    bias_size: Optional[int] = None

    def __post_init__(self):
        if self.per_node_bias and self.bias_size is None:
            raise ContractError("Per-node biases need a bias size.")

    @property
    def widths(self) -> list[int]:
        """Returns the feature widths F_0, ..., F_T."""
        return [INPUT_FEATURES] + [self.features] * self.sublayers

    @property
    def bias_shape(self) -> tuple[int, int]:
        """Returns the shape of a readout bias."""
        return (self.bias_size, 1) if self.per_node_bias else (1, 1)

    def init_bound(self, sublayer: int) -> float:
        """Returns the uniform bound of the filter taps of a sub-layer."""
        fan_in = self.widths[sublayer - 1] * (self.taps + 1)
        return float(np.sqrt(6.0 / (fan_in + self.widths[sublayer])))

    def to_json(self) -> dict:
        """Returns a JSON representation of the dimensions."""
        return asdict(self)


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions of the primal and dual networks."""

    primal_layers: int = 14
    dual_layers: int = 14
    sublayers: int = 3
    taps: int = 1
    features: int = 32
    per_node_bias: bool = False

    def validate(self, path: str = "model") -> None:
        """Raises a ConfigError on invalid values."""
        if self.primal_layers < 1:
            raise ConfigError(f"{path}.primal_layers", "must be at least 1")

        if self.dual_layers < 0:
            raise ConfigError(f"{path}.dual_layers", "must not be negative")

        if self.sublayers < 1:
            raise ConfigError(f"{path}.sublayers", "must be at least 1")

        if self.taps < 0:
            raise ConfigError(f"{path}.taps", "must not be negative")

        if self.features < 1:
            raise ConfigError(f"{path}.features", "must be at least 1")

    def primal(self, n: Optional[int] = None) -> Architecture:
        """Returns the primal network dimensions."""
        return Architecture(
            self.primal_layers,
            self.sublayers,
            self.taps,
            self.features,
            self.per_node_bias,
            n if self.per_node_bias else None,
        )

    def dual(self, rows_: Optional[int] = None) -> Architecture:
        """Returns the dual network dimensions."""
        return Architecture(
            self.dual_layers,
            self.sublayers,
            self.taps,
            self.features,
            self.per_node_bias,
            rows_ if self.per_node_bias else None,
        )


def theta_key(layer: int, sublayer: int, tap: int) -> str:
    """Returns the name of a filter tap."""

    return f"layer{layer}.conv{sublayer}.tap{tap}"


class BoundParams(NamedTuple):
    """Parameters as tensors, either tracked on a tape or constant."""

    arch: Architecture
    tensors: dict[str, Tensor]

    def thetas(self, layer: int, sublayer: int) -> list[Tensor]:
        """Returns the filter taps Θ_{t,0..K_h} of a sub-layer."""
        return [
            self.tensors[theta_key(layer, sublayer, tap)]
            for tap in range(self.arch.taps + 1)
        ]

    def readout(self, layer: int) -> tuple[Tensor, Tensor]:
        """Returns the readout weights W and bias c."""
        return self.tensors[f"layer{layer}.w"], self.tensors[f"layer{layer}.c"]


@dataclass
class UnrolledParams:
    """Learnable tensors of an unrolled network, ordered by layer."""

    arch: Architecture
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    kind: ClassVar[str] = "unrolled"

    def __iter__(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self.tensors.items())

    def bind(self, tape: Optional[Tape] = None) -> BoundParams:
        """Returns the parameters as tensors.
        With a tape they are tracked variables, otherwise constants.
        """
        if tape is None:
            return BoundParams(
                self.arch, {name: Tensor(value) for name, value in self.tensors.items()}
            )

        return BoundParams(
            self.arch,
            {name: tape.variable(value) for name, value in self.tensors.items()},
        )

    def replace(self, tensors: dict[str, np.ndarray]) -> UnrolledParams:
        """Returns parameters of the same kind with new values."""
        return type(self)(self.arch, {name: tensors[name] for name in self.tensors})

    def to_json(self) -> dict:
        """Returns a JSON representation of the parameters."""
        return {
            "kind": self.kind,
            "architecture": self.arch.to_json(),
            "tensors": {name: value.tolist() for name, value in self.tensors.items()},
        }

    @classmethod
    def from_json(cls, json: dict) -> UnrolledParams:
        """Creates parameters from a JSON-ish dict."""
        if json.get("kind") != cls.kind:
            raise ContractError(f"Expected {cls.kind} parameters, got {json.get('kind')}.")

        arch = Architecture(**json["architecture"])
        params = init_params(None, arch, cls)
        tensors = {}

        for name, template in params.tensors.items():
            value = as_matrix(np.array(json["tensors"][name], dtype=np.float64))

            if value.shape != template.shape:
                value = value.reshape(template.shape)

            tensors[name] = value

        return cls(arch, tensors)


class PrimalParams(UnrolledParams):
    """Parameters θ_P of the primal network."""

    kind = "primal"


class DualParams(UnrolledParams):
    """Parameters θ_D of the dual network."""

    kind = "dual"


Params = Union[UnrolledParams, BoundParams]


def init_params(
    rng: Optional[np.random.Generator], arch: Architecture, kind: type = PrimalParams
) -> UnrolledParams:
    """Initializes the filter taps uniformly and the readouts at zero,
    so that the network starts as the identity map.
    Without a generator all tensors are zero.
    """

    tensors = {}

    for layer in range(1, arch.layers + 1):
        for sublayer in range(1, arch.sublayers + 1):
            shape = (arch.widths[sublayer - 1], arch.widths[sublayer])
            bound = arch.init_bound(sublayer)

            for tap in range(arch.taps + 1):
                tensors[theta_key(layer, sublayer, tap)] = (
                    np.zeros(shape) if rng is None else rng.uniform(-bound, bound, shape)
                )

        tensors[f"layer{layer}.w"] = np.zeros((arch.features, 1))
        tensors[f"layer{layer}.c"] = np.zeros(arch.bias_shape)

    return kind(arch, tensors)


def _bound(params: Params) -> BoundParams:
    """Binds plain parameters as constants."""

    if isinstance(params, BoundParams):
        return params

    return params.bind()


def graph_conv_sublayer(X: Tensor, S: Tensor, thetas: Sequence[Tensor]) -> Tensor:
    """Returns tanh(Σₕ SʰXΘₕ), applying S repeatedly."""

    X, S = as_tensor(X), as_tensor(S)  # pylint: disable=C0103

    if S.shape != (X.rows, X.rows):
        raise DimensionError("graph_conv_sublayer", S.shape, X.shape)

    shifted = X
    filtered = matmul(shifted, thetas[0])

    for theta in thetas[1:]:
        shifted = matmul(S, shifted)
        filtered = filtered + matmul(shifted, theta)

    return tanh(filtered)


def node_signal(top: object, bottom: object, z: RelaxedQP) -> Tensor:
    """Stacks [[x, q], [λ, b]] into the two-feature node signal."""

    top, bottom = as_tensor(top), as_tensor(bottom)

    if top.shape != (z.n, 1):
        raise DimensionError("node_signal", top.shape, (z.n, 1))

    if bottom.shape != (z.rows, 1):
        raise DimensionError("node_signal", bottom.shape, (z.rows, 1))

    return vstack(
        [hstack([top, z.tensors["q"]]), hstack([bottom, z.tensors["b"]])]
    )


def _filter(signal: Tensor, z: RelaxedQP, params: BoundParams, layer: int) -> Tensor:
    """Runs the T graph sub-layers of an unrolled layer."""

    for sublayer in range(1, params.arch.sublayers + 1):
        signal = graph_conv_sublayer(
            signal, z.tensors["S"], params.thetas(layer, sublayer)
        )

    return signal


def _bias(bias: Tensor, size: int) -> Tensor:
    """Broadcasts a scalar bias or checks a per-node one."""

    if bias.rows == 1:
        return broadcast_rows(bias, size)

    if bias.rows != size:
        raise DimensionError("readout bias", bias.shape, (size, 1))

    return bias


def primal_layer(
    x_prev: object, lam: object, z: RelaxedQP, params: Params, layer: int
) -> Tensor:
    """x̃_k = x̃_{k-1} + M_P X_T W_k + c_k."""

    params = _bound(params)
    x_prev = as_tensor(x_prev)
    features = _filter(node_signal(x_prev, lam, z), z, params, layer)
    weights, bias = params.readout(layer)
    return x_prev + matmul(rows(features, 0, z.n), weights) + _bias(bias, z.n)


def primal_forward(
    x0: object, lam: object, z: RelaxedQP, params: Params
) -> list[Tensor]:
    """Returns the primal trajectory x̃_0, ..., x̃_K."""

    params = _bound(params)
    trajectory = [as_tensor(x0)]

    for layer in range(1, params.arch.layers + 1):
        trajectory.append(primal_layer(trajectory[-1], lam, z, params, layer))

    return trajectory


def dual_layer(
    lam_prev: object, x_prev: object, z: RelaxedQP, params: Params, layer: int
) -> Tensor:
    """λ_l = relu(λ_{l-1} + M_D X_T W_l + c_l)."""

    params = _bound(params)
    lam_prev = as_tensor(lam_prev)
    features = _filter(node_signal(x_prev, lam_prev, z), z, params, layer)
    weights, bias = params.readout(layer)
    return relu(
        lam_prev
        + matmul(rows(features, z.n, z.nodes), weights)
        + _bias(bias, z.rows)
    )


@dataclass
class Trajectory:
    """Iterates of one coupled forward pass.
    primal_inner[l] is the primal trajectory queried with λ_l.
    """

    primal_inner: list[list[Tensor]]
    duals: list[Tensor]

    @property
    def primal_outer(self) -> list[Tensor]:
        """Returns x_0, ..., x_L."""
        return [inner[-1] for inner in self.primal_inner]

    @property
    def x_final(self) -> Tensor:
        """Returns x_L."""
        return self.primal_inner[-1][-1]

    @property
    def lambda_final(self) -> Tensor:
        """Returns λ_L."""
        return self.duals[-1]


def _start_points(x0: object, queries: int) -> list[object]:
    """Returns one primal start per query."""

    if isinstance(x0, Tensor):
        return [x0] * queries

    x0 = np.asarray(x0, dtype=np.float64)

    if x0.ndim == 1:
        return [x0] * queries

    if x0.shape[0] != queries:
        raise DimensionError("coupled_forward start points", x0.shape, (queries,))

    return list(x0)


def coupled_forward(
    z: RelaxedQP, primal: Params, dual: Params, x0: object, lam0: object
) -> Trajectory:
    """Runs the dual network, querying the primal network once per dual
    layer and once more with the final multiplier.
    x0 is either one start point for all L + 1 queries or one per query.
    """

    primal, dual = _bound(primal), _bound(dual)
    lam = as_tensor(lam0)

    if np.any(lam.data < 0):
        raise ContractError("Initial multipliers must be nonnegative.")

    starts = _start_points(x0, dual.arch.layers + 1)
    inner = []
    duals = [lam]

    for layer in range(1, dual.arch.layers + 1):
        inner.append(primal_forward(starts[layer - 1], duals[-1], z, primal))
        duals.append(dual_layer(duals[-1], inner[-1][-1], z, dual, layer))

    inner.append(primal_forward(starts[-1], duals[-1], z, primal))
    return Trajectory(inner, duals)


def draw_primal_start(
    rng: np.random.Generator, n: int, queries: Optional[int] = None
) -> np.ndarray:
    """Draws x̃_0 uniformly from [-1, 1]ⁿ, optionally once per query."""

    shape = n if queries is None else (queries, n)
    return rng.uniform(-1.0, 1.0, shape)


def draw_dual_start(rng: np.random.Generator, rows_: int) -> np.ndarray:
    """Draws λ_0 uniformly from [0, 0.1]^rows."""

    return rng.uniform(0.0, DUAL_START_HIGH, rows_)
