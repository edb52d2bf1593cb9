"""Mixed-integer QP instances, their box relaxation and Lagrangian."""

from __future__ import annotations
from dataclasses import dataclass, field
from functools import cached_property
from logging import getLogger
from typing import Optional

import numpy as np
from scipy.linalg import eigvalsh

from dagnn.autodiff import Tensor, as_tensor, dot, matmul, scale
from dagnn.exceptions import ConfigError, DimensionError


__all__ = [
    "InstanceDistributionConfig",
    "MIQPInstance",
    "RelaxedQP",
    "constraint_values",
    "generate_instance",
    "grad_x_lagrangian",
    "lagrangian",
    "objective",
    "relax",
    "spectral_norm",
]


LOGGER = getLogger("dagnn.problem")


@dataclass(frozen=True)
class InstanceDistributionConfig:
    """Parameters of the random instance distribution."""

    n: int = 80
    m: int = 45
    r: int = 10
    density: float = 1.0
    pd_eps: float = 1e-2
    margin: float = 0.1
    seed: int = 0

    def validate(self, path: str = "problem") -> None:
        """Raises a ConfigError on invalid values."""
        if self.n < 1:
            raise ConfigError(f"{path}.n", "must be at least 1")

        if not 0 <= self.r <= self.n:
            raise ConfigError(f"{path}.r", "must lie in [0, n]")

        if self.m < 0:
            raise ConfigError(f"{path}.m", "must not be negative")

        if not 0 < self.density <= 1:
            raise ConfigError(f"{path}.density", "must lie in (0, 1]")

        if self.pd_eps <= 0:
            raise ConfigError(f"{path}.pd_eps", "must be positive")

        if self.margin <= 0:
            raise ConfigError(f"{path}.margin", "must be positive")


@dataclass(frozen=True, eq=False)
class MIQPInstance:
    """min ½xᵀPx + qᵀx  s.t.  Āx ≤ b̄,  xᵢ ∈ {-1, 1} for i ∈ I."""

    P: np.ndarray  # pylint: disable=C0103
    q: np.ndarray
    abar: np.ndarray
    bbar: np.ndarray
    int_idx: tuple[int, ...]
    seed: Optional[int] = None
    planted: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        n = self.q.shape[0]

        if self.P.shape != (n, n):
            raise DimensionError("MIQPInstance.P", self.P.shape, (n, n))

        if self.abar.shape != (self.bbar.shape[0], n):
            raise DimensionError("MIQPInstance.abar", self.abar.shape, self.bbar.shape)

        if list(self.int_idx) != sorted(set(self.int_idx)) or any(
            not 0 <= index < n for index in self.int_idx
        ):
            raise DimensionError("MIQPInstance.int_idx", (len(self.int_idx),), (n,))

    @property
    def n(self) -> int:
        """Returns the amount of variables."""
        return self.q.shape[0]

    @property
    def m(self) -> int:
        """Returns the amount of linear constraints."""
        return self.bbar.shape[0]

    @property
    def r(self) -> int:
        """Returns the amount of integer variables."""
        return len(self.int_idx)


@dataclass(frozen=True, eq=False)
class RelaxedQP:
    """The box-relaxed convex QP with its graph shift operator.
    Nodes 0..n-1 are variables, nodes n..n+m+2r-1 are constraints.
    """

    P: np.ndarray  # pylint: disable=C0103
    q: np.ndarray
    A: np.ndarray  # pylint: disable=C0103
    b: np.ndarray
    n: int
    m: int
    r: int
    S: np.ndarray  # pylint: disable=C0103
    norm_scale: float

    @property
    def rows(self) -> int:
        """Returns the amount of relaxed constraints m + 2r."""
        return self.m + 2 * self.r

    @property
    def nodes(self) -> int:
        """Returns the amount of graph nodes."""
        return self.n + self.rows

    @cached_property
    def tensors(self) -> dict[str, Tensor]:
        """Returns constant tensors of the problem data."""
        return {
            "P": Tensor(self.P),
            "q": Tensor(self.q),
            "A": Tensor(self.A.reshape(self.rows, self.n)),
            "At": Tensor(self.A.reshape(self.rows, self.n).T),
            "b": Tensor(self.b),
            "S": Tensor(self.S),
        }


def spectral_norm(matrix: np.ndarray) -> float:
    """Returns ‖·‖₂ of a symmetric matrix from its eigenvalues."""

    if matrix.size == 0 or not np.any(matrix):
        return 0.0

    return float(np.max(np.abs(eigvalsh(matrix))))


def generate_instance(
    cfg: InstanceDistributionConfig, rng: np.random.Generator
) -> MIQPInstance:
    """Draws an instance with a planted feasible point."""

    n, m, r = cfg.n, cfg.m, cfg.r
    basis = rng.standard_normal((n, n))
    P = basis.T @ basis / n + cfg.pd_eps * np.eye(n)  # pylint: disable=C0103
    P = (P + P.T) / 2  # pylint: disable=C0103
    q = rng.standard_normal(n)
    abar = rng.standard_normal((m, n))

    if cfg.density < 1:
        abar *= rng.random((m, n)) < cfg.density

    int_idx = tuple(sorted(int(i) for i in rng.choice(n, size=r, replace=False)))
    planted = rng.uniform(-1.0, 1.0, n)
    planted[list(int_idx)] = np.where(planted[list(int_idx)] >= 0, 1.0, -1.0)
    slack = rng.uniform(cfg.margin, 2 * cfg.margin, m)
    bbar = abar @ planted + slack
    return MIQPInstance(P, q, abar, bbar, int_idx, cfg.seed, planted)


def selection_matrix(int_idx: tuple[int, ...], n: int) -> np.ndarray:
    """Returns M with rows e_i for i in the integer index set."""

    selection = np.zeros((len(int_idx), n))
    selection[np.arange(len(int_idx)), list(int_idx)] = 1.0
    return selection


def relax(inst: MIQPInstance) -> RelaxedQP:
    """Replaces xᵢ ∈ {-1, 1} by -1 ≤ xᵢ ≤ 1 and builds the graph shift."""

    selection = selection_matrix(inst.int_idx, inst.n)
    A = np.vstack([inst.abar, selection, -selection])  # pylint: disable=C0103
    b = np.concatenate([inst.bbar, np.ones(inst.r), np.ones(inst.r)])
    rows = A.shape[0]
    shift = np.block([[inst.P, A.T], [A, np.zeros((rows, rows))]])
    norm_scale = spectral_norm(shift)
    LOGGER.debug("Graph shift of %i nodes scaled by 1/%.6g.", len(shift), norm_scale)
    return RelaxedQP(
        P=inst.P,
        q=inst.q,
        A=A,
        b=b,
        n=inst.n,
        m=inst.m,
        r=inst.r,
        S=shift / norm_scale,
        norm_scale=norm_scale,
    )


def _column(value: object, size: int, name: str) -> Tensor:
    """Returns the value as a column tensor of the given size."""

    tensor = as_tensor(value)

    if tensor.shape != (size, 1):
        raise DimensionError(name, tensor.shape, (size, 1))

    return tensor


def constraint_values(x: object, z: RelaxedQP) -> Tensor:
    """Returns f(x; z) = Ax - b."""

    x = _column(x, z.n, "constraint_values")
    return matmul(z.tensors["A"], x) - z.tensors["b"]


def objective(x: object, z: RelaxedQP) -> Tensor:
    """Returns ½xᵀPx + qᵀx."""

    x = _column(x, z.n, "objective")
    return scale(dot(x, matmul(z.tensors["P"], x)), 0.5) + dot(z.tensors["q"], x)


def lagrangian(x: object, lam: object, z: RelaxedQP) -> Tensor:
    """Returns ½xᵀPx + qᵀx + λᵀ(Ax - b)."""

    lam = _column(lam, z.rows, "lagrangian")
    return objective(x, z) + dot(lam, constraint_values(x, z))


def grad_x_lagrangian(x: object, lam: object, z: RelaxedQP) -> Tensor:
    """Returns ∇ₓL = Px + q + Aᵀλ as a first-order expression."""

    x = _column(x, z.n, "grad_x_lagrangian")
    lam = _column(lam, z.rows, "grad_x_lagrangian")
    return matmul(z.tensors["P"], x) + z.tensors["q"] + matmul(z.tensors["At"], lam)
