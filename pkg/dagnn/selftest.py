"""Invariant checks run by the check command."""

from __future__ import annotations
from dataclasses import replace
from logging import getLogger
from typing import Callable, NamedTuple

import numpy as np

from dagnn.autodiff import Tensor, dot, finite_difference_check, tanh
from dagnn.gnn import (
    BoundParams,
    DualParams,
    ModelConfig,
    PrimalParams,
    UnrolledParams,
    coupled_forward,
    draw_dual_start,
    draw_primal_start,
    init_params,
)
from dagnn.oracle import DAConfig, active_set_enumerate, dual_ascent
from dagnn.problem import (
    InstanceDistributionConfig,
    RelaxedQP,
    generate_instance,
    lagrangian,
    objective,
    relax,
)


__all__ = [
    "CheckResult",
    "check_active_set",
    "check_coupled_gradients",
    "check_elementwise_gradients",
    "check_identity_at_init",
    "check_oracle_kkt",
    "check_permutation_equivariance",
    "check_relu_nonnegativity",
    "permute",
    "random_params",
    "run_selftest",
]


LOGGER = getLogger("dagnn.selftest")
GRADIENT_TOL = 1e-4
KKT_TOL = 1e-6
EQUIVARIANCE_TOL = 1e-10
SMALL = InstanceDistributionConfig(n=6, m=4, r=2)
CROSS_CHECK = DAConfig(tol=1e-12, max_iter=200_000)
SMALL_MODEL = ModelConfig(primal_layers=3, dual_layers=3, sublayers=2, taps=1, features=4)


class CheckResult(NamedTuple):
    """Outcome of one self-test."""

    name: str
    passed: bool
    detail: str


def random_params(
    rng: np.random.Generator, model: ModelConfig, kind: type = PrimalParams
) -> UnrolledParams:
    """Returns parameters with random filter taps and readouts."""

    arch = model.primal() if kind is PrimalParams else model.dual()
    params = init_params(rng, arch, kind)
    return params.replace(
        {
            name: value if ".conv" in name else rng.uniform(-0.5, 0.5, value.shape)
            for name, value in params.tensors.items()
        }
    )


def _small_problem(seed: int) -> RelaxedQP:
    rng = np.random.default_rng(seed)
    return relax(generate_instance(replace(SMALL, seed=seed), rng))


def check_elementwise_gradients() -> CheckResult:
    """Finite differences of tanh and a linear map."""

    weights = np.array([[1.5], [-2.0], [0.25]])
    errors = {
        "tanh": finite_difference_check(tanh, 0.3, eps=1e-5),
        "linear": finite_difference_check(lambda t: dot(t, Tensor(weights)), np.ones(3)),
    }
    passed = errors["tanh"] < 1e-6 and errors["linear"] < 1e-10
    return CheckResult(
        "ad-elementwise",
        passed,
        ", ".join(f"{name} {error:.2e}" for name, error in errors.items()),
    )


def _coupled_error(seed: int) -> float:
    """Worst relative error over all parameter tensors of both networks."""

    rng = np.random.default_rng(seed)
    z = _small_problem(seed)
    primal = random_params(rng, SMALL_MODEL, PrimalParams)
    dual = random_params(rng, SMALL_MODEL, DualParams)
    x0 = draw_primal_start(rng, z.n)
    lam0 = draw_dual_start(rng, z.rows)
    probe = Tensor(rng.standard_normal(z.n))
    worst = 0.0

    def loss(bound_primal: BoundParams, bound_dual: BoundParams) -> Tensor:
        trajectory = coupled_forward(z, bound_primal, bound_dual, x0, lam0)
        return lagrangian(trajectory.x_final, trajectory.lambda_final, z) + dot(
            probe, trajectory.x_final
        )

    for params, is_primal in ((primal, True), (dual, False)):
        constants = params.bind()

        for name, value in params.tensors.items():

            def function(tensor: Tensor, name: str = name) -> Tensor:
                bound = BoundParams(constants.arch, {**constants.tensors, name: tensor})
                return loss(bound, dual.bind()) if is_primal else loss(primal.bind(), bound)

            worst = max(worst, finite_difference_check(function, value))

    return worst


def check_coupled_gradients(seeds: int = 3) -> CheckResult:
    """Finite differences through the full coupled forward pass."""

    errors = [_coupled_error(seed) for seed in range(seeds)]
    worst = max(errors, default=0.0)
    return CheckResult(
        "ad-coupled", worst <= GRADIENT_TOL, f"max rel. error {worst:.2e} over {seeds} seeds"
    )


def check_oracle_kkt(count: int = 5) -> CheckResult:
    """Dual ascent converges to KKT points."""

    worst = 0.0
    unconverged = 0

    for seed in range(count):
        rng = np.random.default_rng(seed)
        cfg = InstanceDistributionConfig(n=12, m=6, r=3, seed=seed)
        solution = dual_ascent(relax(generate_instance(cfg, rng)), DAConfig())
        unconverged += not solution.converged
        worst = max(worst, solution.kkt.worst)

    return CheckResult(
        "oracle-kkt",
        not unconverged and worst <= KKT_TOL,
        f"worst KKT residual {worst:.2e}, {unconverged} unconverged",
    )


def check_active_set(count: int = 5) -> CheckResult:
    """Dual ascent agrees with active-set enumeration on tiny instances."""

    worst_x = worst_gap = 0.0

    for seed in range(count):
        rng = np.random.default_rng(seed)
        cfg = InstanceDistributionConfig(n=5, m=3, r=2, seed=seed)
        z = relax(generate_instance(cfg, rng))
        reference = active_set_enumerate(z)
        solution = dual_ascent(z, CROSS_CHECK)
        worst_x = max(worst_x, float(np.max(np.abs(solution.x_star - reference.x_star))))
        worst_gap = max(
            worst_gap,
            abs(objective(solution.x_star, z).item() - objective(reference.x_star, z).item()),
        )

    return CheckResult(
        "active-set",
        worst_x <= 1e-5 and worst_gap <= 1e-7,
        f"max |dx| {worst_x:.2e}, objective gap {worst_gap:.2e}",
    )


def check_relu_nonnegativity(draws: int = 50) -> CheckResult:
    """Every dual iterate is nonnegative for random parameters."""

    z = _small_problem(0)
    rng = np.random.default_rng(0)
    negative = 0

    for _ in range(draws):
        trajectory = coupled_forward(
            z,
            random_params(rng, SMALL_MODEL, PrimalParams),
            random_params(rng, SMALL_MODEL, DualParams),
            draw_primal_start(rng, z.n),
            draw_dual_start(rng, z.rows),
        )
        negative += any(np.any(lam.data < 0) for lam in trajectory.duals)

    return CheckResult("relu-nonnegative", not negative, f"{negative}/{draws} violating draws")


def check_identity_at_init() -> CheckResult:
    """Freshly initialized networks map their inputs to themselves."""

    z = _small_problem(1)
    rng = np.random.default_rng(1)
    primal = init_params(rng, SMALL_MODEL.primal(), PrimalParams)
    dual = init_params(rng, SMALL_MODEL.dual(), DualParams)
    x0, lam0 = draw_primal_start(rng, z.n), draw_dual_start(rng, z.rows)
    trajectory = coupled_forward(z, primal, dual, x0, lam0)
    deviation = max(
        float(np.max(np.abs(trajectory.x_final.vector() - x0))),
        float(np.max(np.abs(trajectory.lambda_final.vector() - lam0))),
    )
    return CheckResult("identity-at-init", deviation <= 1e-12, f"deviation {deviation:.2e}")


def permute(z: RelaxedQP, variables: np.ndarray, constraints: np.ndarray) -> RelaxedQP:
    """Relabels the variable and constraint nodes of a problem."""

    nodes = np.concatenate([variables, z.n + constraints])
    return RelaxedQP(
        P=z.P[np.ix_(variables, variables)],
        q=z.q[variables],
        A=z.A[np.ix_(constraints, variables)],
        b=z.b[constraints],
        n=z.n,
        m=z.m,
        r=z.r,
        S=z.S[np.ix_(nodes, nodes)],
        norm_scale=z.norm_scale,
    )


def check_permutation_equivariance(draws: int = 5) -> CheckResult:
    """Relabeling nodes relabels the outputs the same way."""

    worst = 0.0

    for seed in range(draws):
        rng = np.random.default_rng(seed)
        z = _small_problem(seed)
        primal = random_params(rng, SMALL_MODEL, PrimalParams)
        dual = random_params(rng, SMALL_MODEL, DualParams)
        x0, lam0 = draw_primal_start(rng, z.n), draw_dual_start(rng, z.rows)
        variables, constraints = rng.permutation(z.n), rng.permutation(z.rows)
        original = coupled_forward(z, primal, dual, x0, lam0)
        permuted = coupled_forward(
            permute(z, variables, constraints),
            primal,
            dual,
            x0[variables],
            lam0[constraints],
        )
        x_shift = permuted.x_final.vector() - original.x_final.vector()[variables]
        lam_shift = (
            permuted.lambda_final.vector() - original.lambda_final.vector()[constraints]
        )
        worst = max(worst, float(np.max(np.abs(x_shift))), float(np.max(np.abs(lam_shift))))

    return CheckResult(
        "permutation-equivariance", worst <= EQUIVARIANCE_TOL, f"max deviation {worst:.2e}"
    )


def run_selftest(seeds: int = 3) -> list[CheckResult]:
    """Runs every check and logs its outcome."""

    checks: list[Callable[[], CheckResult]] = [
        check_elementwise_gradients,
        lambda: check_coupled_gradients(seeds),
        check_oracle_kkt,
        check_active_set,
        check_relu_nonnegativity,
        check_identity_at_init,
        check_permutation_equivariance,
    ]
    results = []

    for check in checks:
        result = check()
        results.append(result)
        log = LOGGER.info if result.passed else LOGGER.error
        log("%s: %s (%s).", result.name, "ok" if result.passed else "FAILED", result.detail)

    return results
