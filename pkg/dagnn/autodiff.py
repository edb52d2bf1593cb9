"""Dense matrix arithmetic with reverse-mode automatic differentiation.

Every value is a two-dimensional float64 matrix; vectors are columns.
Operations on tensors that belong to a tape are recorded on that tape
in creation order. backward() replays the tape once, in reverse.
"""

from __future__ import annotations
from itertools import count
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np

from dagnn.exceptions import ContractError, DimensionError


__all__ = [
    "FD_FLOOR",
    "Gradients",
    "Tape",
    "TapeNode",
    "Tensor",
    "add",
    "as_matrix",
    "as_tensor",
    "backward",
    "broadcast_rows",
    "dot",
    "elementwise",
    "finite_difference_check",
    "hadamard",
    "hstack",
    "l2norm",
    "matmul",
    "relu",
    "rows",
    "scale",
    "sub",
    "tanh",
    "total",
    "transpose",
    "vstack",
]


FD_FLOOR = 1e-8
Partials = tuple[Optional[np.ndarray], ...]
BackwardRule = Callable[[np.ndarray], Partials]
_IDS = count()


class TapeNode(NamedTuple):
    """A recorded operation."""

    op: str
    parents: tuple[Optional[int], ...]
    output: int
    rule: BackwardRule


def as_matrix(data: object) -> np.ndarray:
    """Returns the data as a two-dimensional float64 array."""

    array = np.asarray(data, dtype=np.float64)

    if array.ndim == 0:
        return array.reshape(1, 1)

    if array.ndim == 1:
        return array.reshape(-1, 1)

    if array.ndim == 2:
        return array

    raise DimensionError("as_matrix", array.shape)


class Tensor:
    """A dense matrix, optionally tracked by a tape."""

    __slots__ = ("data", "id", "tape")
    __array_priority__ = 1000

    def __init__(self, data: object, tape: Optional[Tape] = None):
        self.data = as_matrix(data)
        self.tape = tape
        self.id = next(_IDS)

    def __repr__(self):
        tracked = ", tracked" if self.tracked else ""
        return f"Tensor(shape={self.shape}{tracked})"

    def __add__(self, other: object) -> Tensor:
        return add(self, other)

    def __radd__(self, other: object) -> Tensor:
        return add(other, self)

    def __sub__(self, other: object) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: object) -> Tensor:
        return sub(other, self)

    def __neg__(self) -> Tensor:
        return scale(self, -1.0)

    def __mul__(self, other: object) -> Tensor:
        if isinstance(other, (int, float)):
            return scale(self, other)

        return hadamard(self, other)

    def __rmul__(self, other: object) -> Tensor:
        return self.__mul__(other)

    def __matmul__(self, other: object) -> Tensor:
        return matmul(self, other)

    def __rmatmul__(self, other: object) -> Tensor:
        return matmul(other, self)

    @property
    def shape(self) -> tuple[int, int]:
        """Returns (rows, cols)."""
        return self.data.shape

    @property
    def rows(self) -> int:
        """Returns the amount of rows."""
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        """Returns the amount of columns."""
        return self.data.shape[1]

    @property
    def tracked(self) -> bool:
        """Determines whether the tensor is recorded on a tape."""
        return self.tape is not None

    @property
    def T(self) -> Tensor:  # pylint: disable=C0103
        """Returns the transpose."""
        return transpose(self)

    def item(self) -> float:
        """Returns the value of a scalar tensor."""
        if self.shape != (1, 1):
            raise ContractError(f"Not a scalar tensor: shape {self.shape}.")

        return float(self.data[0, 0])

    def vector(self) -> np.ndarray:
        """Returns a copy of a column tensor as a flat array."""
        if self.cols != 1:
            raise DimensionError("vector", self.shape)

        return self.data[:, 0].copy()

    def detach(self) -> Tensor:
        """Returns an untracked tensor sharing the values."""
        return Tensor(self.data)


class Tape:
    """Records operations in creation order."""

    def __init__(self):
        self.nodes: list[TapeNode] = []

    def __len__(self):
        return len(self.nodes)

    def variable(self, data: object) -> Tensor:
        """Returns a tracked leaf tensor holding a copy of the data."""
        return Tensor(np.array(as_matrix(data), dtype=np.float64), tape=self)

    def record(
        self, op: str, data: np.ndarray, inputs: Sequence[Tensor], rule: BackwardRule
    ) -> Tensor:
        """Appends a node and returns its output tensor."""
        output = Tensor(data, tape=self)
        parents = tuple(tensor.id if tensor.tape is self else None for tensor in inputs)
        self.nodes.append(TapeNode(op, parents, output.id, rule))
        return output


class Gradients(dict):
    """Maps tensor ids to gradient arrays.
    Tensors may be used as keys directly.
    """

    def __getitem__(self, key: Union[Tensor, int]) -> np.ndarray:
        if isinstance(key, Tensor):
            key = key.id

        return super().__getitem__(key)

    def __contains__(self, key: object) -> bool:
        if isinstance(key, Tensor):
            key = key.id

        return super().__contains__(key)


def as_tensor(value: object) -> Tensor:
    """Returns tensors unchanged and wraps anything else as a constant."""

    if isinstance(value, Tensor):
        return value

    return Tensor(value)


def _tape_of(*tensors: Tensor) -> Optional[Tape]:
    """Returns the tape shared by the tracked operands."""

    tapes = {id(tensor.tape): tensor.tape for tensor in tensors if tensor.tracked}

    if not tapes:
        return None

    if len(tapes) > 1:
        raise ContractError("Operands are recorded on different tapes.")

    return next(iter(tapes.values()))


def _result(
    op: str, data: np.ndarray, inputs: Sequence[Tensor], rule: BackwardRule
) -> Tensor:
    """Wraps the forward value and records it if any input is tracked."""

    if (tape := _tape_of(*inputs)) is None:
        return Tensor(data)

    return tape.record(op, data, inputs, rule)


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    """Raises a dimension error unless both shapes are equal."""

    if a.shape != b.shape:
        raise DimensionError(op, a.shape, b.shape)


def matmul(a: object, b: object) -> Tensor:
    """Matrix product."""

    a, b = as_tensor(a), as_tensor(b)

    if a.cols != b.rows:
        raise DimensionError("matmul", a.shape, b.shape)

    left, right = a.data, b.data

    def rule(grad: np.ndarray) -> Partials:
        return (
            grad @ right.T if a.tracked else None,
            left.T @ grad if b.tracked else None,
        )

    return _result("matmul", left @ right, (a, b), rule)


def add(a: object, b: object) -> Tensor:
    """Elementwise sum."""

    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape("add", a, b)
    return _result("add", a.data + b.data, (a, b), lambda grad: (grad, grad))


def sub(a: object, b: object) -> Tensor:
    """Elementwise difference."""

    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape("sub", a, b)
    return _result("sub", a.data - b.data, (a, b), lambda grad: (grad, -grad))


def hadamard(a: object, b: object) -> Tensor:
    """Elementwise product."""

    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape("hadamard", a, b)
    left, right = a.data, b.data
    return _result(
        "hadamard", left * right, (a, b), lambda grad: (grad * right, grad * left)
    )


def scale(a: object, factor: float) -> Tensor:
    """Multiplication by a constant."""

    a = as_tensor(a)
    factor = float(factor)
    return _result("scale", a.data * factor, (a,), lambda grad: (grad * factor,))


def tanh(a: object) -> Tensor:
    """Hyperbolic tangent."""

    a = as_tensor(a)
    value = np.tanh(a.data)
    return _result("tanh", value, (a,), lambda grad: (grad * (1.0 - value**2),))


def relu(a: object) -> Tensor:
    """Rectifier with subgradient 0 at 0."""

    a = as_tensor(a)
    mask = a.data > 0
    return _result("relu", np.where(mask, a.data, 0.0), (a,), lambda grad: (grad * mask,))


ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "hadamard": hadamard,
    "tanh": tanh,
    "relu": relu,
    "scale": scale,
}


def elementwise(kind: str, *args: object) -> Tensor:
    """Dispatches a pointwise operation by name."""

    try:
        function = ELEMENTWISE[kind]
    except KeyError:
        raise ContractError(f"Unknown elementwise operation: {kind!r}.") from None

    return function(*args)


def transpose(a: object) -> Tensor:
    """Matrix transpose."""

    a = as_tensor(a)
    return _result("transpose", a.data.T, (a,), lambda grad: (grad.T,))


def vstack(tensors: Sequence[object]) -> Tensor:
    """Stacks tensors with equal column counts on top of each other."""

    tensors = [as_tensor(tensor) for tensor in tensors]

    if len({tensor.cols for tensor in tensors}) > 1:
        raise DimensionError("vstack", *(tensor.shape for tensor in tensors))

    bounds = np.cumsum([0] + [tensor.rows for tensor in tensors])

    def rule(grad: np.ndarray) -> Partials:
        return tuple(grad[start:stop] for start, stop in zip(bounds, bounds[1:]))

    data = np.vstack([tensor.data for tensor in tensors])
    return _result("vstack", data, tensors, rule)


def hstack(tensors: Sequence[object]) -> Tensor:
    """Places tensors with equal row counts side by side."""

    tensors = [as_tensor(tensor) for tensor in tensors]

    if len({tensor.rows for tensor in tensors}) > 1:
        raise DimensionError("hstack", *(tensor.shape for tensor in tensors))

    bounds = np.cumsum([0] + [tensor.cols for tensor in tensors])

    def rule(grad: np.ndarray) -> Partials:
        return tuple(grad[:, start:stop] for start, stop in zip(bounds, bounds[1:]))

    data = np.hstack([tensor.data for tensor in tensors])
    return _result("hstack", data, tensors, rule)


def rows(a: object, start: int, stop: int) -> Tensor:
    """Selects the rows start..stop-1."""

    a = as_tensor(a)

    if not 0 <= start <= stop <= a.rows:
        raise DimensionError(f"rows[{start}:{stop}]", a.shape)

    shape = a.shape

    def rule(grad: np.ndarray) -> Partials:
        full = np.zeros(shape)
        full[start:stop] = grad
        return (full,)

    return _result("rows", a.data[start:stop], (a,), rule)


def broadcast_rows(a: object, count_: int) -> Tensor:
    """Repeats a single-row tensor count_ times."""

    a = as_tensor(a)

    if a.rows != 1:
        raise DimensionError("broadcast_rows", a.shape)

    return _result(
        "broadcast",
        np.repeat(a.data, count_, axis=0),
        (a,),
        lambda grad: (grad.sum(axis=0, keepdims=True),),
    )


def total(a: object) -> Tensor:
    """Sum of all entries."""

    a = as_tensor(a)
    shape = a.shape
    return _result(
        "total", np.array([[a.data.sum()]]), (a,), lambda grad: (np.full(shape, grad[0, 0]),)
    )


def dot(a: object, b: object) -> Tensor:
    """Frobenius inner product of two equally shaped tensors."""

    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape("dot", a, b)
    left, right = a.data, b.data

    def rule(grad: np.ndarray) -> Partials:
        return grad[0, 0] * right, grad[0, 0] * left

    return _result("dot", np.array([[np.sum(left * right)]]), (a, b), rule)


def l2norm(v: object) -> Tensor:
    """Euclidean (Frobenius) norm with zero subgradient at the origin."""

    v = as_tensor(v)
    norm = float(np.sqrt(np.sum(v.data**2)))
    values = v.data

    def rule(grad: np.ndarray) -> Partials:
        if norm == 0.0:
            return (np.zeros_like(values),)

        return (grad[0, 0] * values / norm,)

    return _result("l2norm", np.array([[norm]]), (v,), rule)


def backward(loss: Tensor, params: Iterable[Tensor]) -> Gradients:
    """Returns the gradients of a scalar loss w.r.t. the given leaf tensors.
    Parameters that the loss does not depend on receive zero gradients.
    """

    if loss.shape != (1, 1):
        raise ContractError(f"Loss must be a scalar tensor, got shape {loss.shape}.")

    params = list(params)
    wanted = {param.id for param in params}
    adjoints = {loss.id: np.ones((1, 1))}

    if loss.tracked:
        for node in reversed(loss.tape.nodes):
            if (grad := adjoints.get(node.output)) is None:
                continue

            if node.output not in wanted:
                del adjoints[node.output]

            for parent, partial in zip(node.parents, node.rule(grad)):
                if parent is None or partial is None:
                    continue

                if parent in adjoints:
                    adjoints[parent] = adjoints[parent] + partial
                else:
                    adjoints[parent] = partial

    gradients = Gradients()

    for param in params:
        grad = adjoints.get(param.id)
        gradients[param.id] = np.zeros(param.shape) if grad is None else grad

    return gradients


def finite_difference_check(
    function: Callable[[Tensor], Tensor], point: object, eps: float = 1e-6
) -> float:
    """Compares backward() against central differences entrywise.
    Returns the maximum relative error.
    """

    if eps <= 0:
        raise ContractError(f"Finite-difference step must be positive, got {eps}.")

    base = np.array(as_matrix(point.data if isinstance(point, Tensor) else point))
    tape = Tape()
    variable = tape.variable(base)
    analytic = backward(function(variable), [variable])[variable]
    worst = 0.0

    for index in np.ndindex(base.shape):
        plus, minus = base.copy(), base.copy()
        plus[index] += eps
        minus[index] -= eps
        numeric = (function(Tensor(plus)).item() - function(Tensor(minus)).item()) / (
            2 * eps
        )
        denominator = max(abs(analytic[index]), abs(numeric), FD_FLOOR)
        worst = max(worst, abs(analytic[index] - numeric) / denominator)

    return worst
