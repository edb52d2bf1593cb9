"""Classical solvers producing ground-truth primal/dual pairs."""

from __future__ import annotations
from dataclasses import dataclass, field
from itertools import combinations
from logging import getLogger
from threading import Lock
from typing import Optional
from weakref import WeakKeyDictionary

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve

from dagnn.exceptions import ConfigError, InstanceInvalid, SizeLimitExceeded
from dagnn.json import View
from dagnn.problem import RelaxedQP, spectral_norm
from dagnn.types import KKTResiduals


__all__ = [
    "DAConfig",
    "OracleSolution",
    "active_set_enumerate",
    "dual_ascent",
    "dual_value",
    "inner_min",
    "kkt_residuals",
]


LOGGER = getLogger("dagnn.oracle")
MAX_ENUM_N = 8
MAX_ENUM_ROWS = 12
FEASIBILITY_TOL = 1e-9
_FACTORS: WeakKeyDictionary = WeakKeyDictionary()
_FACTORS_LOCK = Lock()


@dataclass(frozen=True)
class DAConfig:
    """Dual ascent settings. A step size of None selects 1/‖AP⁻¹Aᵀ‖₂."""

    step_size: Optional[float] = None
    max_iter: int = 50000
    tol: float = 1e-8
    kkt_tol: float = 1e-6
    polish: bool = False
    record_trace: bool = False

    def validate(self, path: str = "oracle") -> None:
        """Raises a ConfigError on invalid values."""
        if self.step_size is not None and self.step_size <= 0:
            raise ConfigError(f"{path}.step_size", "must be positive")

        if self.max_iter < 1:
            raise ConfigError(f"{path}.max_iter", "must be at least 1")

        if self.tol <= 0:
            raise ConfigError(f"{path}.tol", "must be positive")

        if self.kkt_tol <= 0:
            raise ConfigError(f"{path}.kkt_tol", "must be positive")


@dataclass
class OracleSolution:
    """A reference primal/dual pair."""

    x_star: np.ndarray
    lambda_star: np.ndarray
    iterations: int
    converged: bool
    kkt: KKTResiduals
    trace: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        """Returns a JSON representation without the trace."""
        return SOLUTION_VIEW(self)

    @classmethod
    def from_json(cls, json: dict) -> OracleSolution:
        """Creates a solution from a JSON-ish dict."""
        return cls(
            x_star=np.array(json["xStar"], dtype=np.float64),
            lambda_star=np.array(json["lambdaStar"], dtype=np.float64),
            iterations=int(json["iterations"]),
            converged=bool(json["converged"]),
            kkt=KKTResiduals.from_json(json["kkt"]),
        )


SOLUTION_VIEW = View(
    {
        "x_star": "xStar",
        "lambda_star": "lambdaStar",
        "kkt": None,
        "iterations": None,
        "converged": None,
    }
)


def cholesky(z: RelaxedQP) -> tuple[np.ndarray, bool]:
    """Returns the cached Cholesky factor of P."""

    with _FACTORS_LOCK:
        if (factor := _FACTORS.get(z)) is not None:
            return factor

    try:
        factor = cho_factor(z.P)
    except LinAlgError:
        raise InstanceInvalid("P is not positive definite.") from None

    with _FACTORS_LOCK:
        return _FACTORS.setdefault(z, factor)


def inner_min(lam: np.ndarray, z: RelaxedQP) -> np.ndarray:
    """Returns argminₓ L(x, λ) = -P⁻¹(q + Aᵀλ)."""

    return -cho_solve(cholesky(z), z.q + z.A.T @ lam)


def dual_value(lam: np.ndarray, z: RelaxedQP) -> float:
    """Returns the dual function g(λ) = L(x*(λ), λ)."""

    x = inner_min(lam, z)
    return float(0.5 * x @ z.P @ x + z.q @ x + lam @ (z.A @ x - z.b))


def kkt_residuals(x: np.ndarray, lam: np.ndarray, z: RelaxedQP) -> KKTResiduals:
    """Returns the four KKT residuals of (x, λ)."""

    values = z.A @ x - z.b
    stationarity = z.P @ x + z.q + z.A.T @ lam
    return KKTResiduals(
        stationarity=float(np.max(np.abs(stationarity), initial=0.0)),
        primal_feasibility=float(np.max(np.maximum(values, 0.0), initial=0.0)),
        dual_feasibility=float(np.max(np.maximum(-lam, 0.0), initial=0.0)),
        complementary_slackness=abs(float(lam @ values)),
    )


def default_step_size(z: RelaxedQP) -> float:
    """Returns 1/‖AP⁻¹Aᵀ‖₂, the Lipschitz-safe dual step."""

    if z.rows == 0:
        return 1.0

    hessian = z.A @ cho_solve(cholesky(z), z.A.T)
    return 1.0 / spectral_norm((hessian + hessian.T) / 2)


def dual_ascent(z: RelaxedQP, cfg: DAConfig = DAConfig()) -> OracleSolution:
    """Alternates exact Lagrangian minimization with projected ascent on λ."""

    step = default_step_size(z) if cfg.step_size is None else cfg.step_size
    lam = np.zeros(z.rows)
    trace = []
    converged = False
    iterations = 0

    while iterations < cfg.max_iter:
        iterations += 1
        x = inner_min(lam, z)

        if cfg.record_trace:
            trace.append((x, lam))

        update = np.maximum(lam + step * (z.A @ x - z.b), 0.0)
        change = np.max(np.abs(update - lam), initial=0.0)
        lam = update

        if change <= cfg.tol:
            x = inner_min(lam, z)

            if kkt_residuals(x, lam, z).worst <= cfg.kkt_tol:
                converged = True
                break

    x = inner_min(lam, z)
    solution = OracleSolution(x, lam, iterations, converged, kkt_residuals(x, lam, z), trace)

    if cfg.polish and z.rows:
        solution = _polish(solution, z)

    if not solution.converged:
        LOGGER.warning(
            "Dual ascent did not converge within %i iterations (worst KKT residual %.3e).",
            cfg.max_iter,
            solution.kkt.worst,
        )

    return solution


def _solve_active(z: RelaxedQP, active: tuple[int, ...]) -> Optional[tuple]:
    """Solves the equality-constrained KKT system for an active set."""

    rows = z.A[list(active)]

    if active and np.linalg.matrix_rank(rows) < len(active):
        return None

    size = len(active)
    system = np.block([[z.P, rows.T], [rows, np.zeros((size, size))]])
    rhs = np.concatenate([-z.q, z.b[list(active)]])

    try:
        solution = solve(system, rhs, assume_a="sym")
    except LinAlgError:
        return None

    lam = np.zeros(z.rows)
    lam[list(active)] = solution[z.n :]
    return solution[: z.n], lam


def _polish(solution: OracleSolution, z: RelaxedQP) -> OracleSolution:
    """Re-solves the KKT system on the identified active set
    and keeps the result if it is at least as accurate.
    The convergence flag stays that of the dual ascent run.
    """

    active = tuple(int(i) for i in np.flatnonzero(solution.lambda_star > 0))

    if (candidate := _solve_active(z, active)) is None:
        return solution

    x, lam = candidate
    lam = np.maximum(lam, 0.0)
    kkt = kkt_residuals(x, lam, z)

    if kkt.worst > solution.kkt.worst:
        return solution

    return OracleSolution(
        x, lam, solution.iterations, solution.converged, kkt, solution.trace
    )


def active_set_enumerate(z: RelaxedQP) -> OracleSolution:
    """Enumerates all active sets of a tiny instance."""

    if z.n > MAX_ENUM_N or z.rows > MAX_ENUM_ROWS:
        raise SizeLimitExceeded(z.n, z.rows, MAX_ENUM_N, MAX_ENUM_ROWS)

    best = None
    best_value = np.inf
    examined = 0

    for size in range(min(z.n, z.rows) + 1):
        for active in combinations(range(z.rows), size):
            examined += 1

            if (candidate := _solve_active(z, active)) is None:
                continue

            x, lam = candidate

            if np.any(lam < -FEASIBILITY_TOL) or np.any(
                z.A @ x > z.b + FEASIBILITY_TOL
            ):
                continue

            if (value := 0.5 * x @ z.P @ x + z.q @ x) < best_value:
                best, best_value = (x, lam), value

    if best is None:
        empty = np.zeros(z.rows)
        x = inner_min(empty, z)
        return OracleSolution(x, empty, examined, False, kkt_residuals(x, empty, z))

    x, lam = best
    return OracleSolution(x, lam, examined, True, kkt_residuals(x, lam, z))
