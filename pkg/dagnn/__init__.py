"""Coupled primal/dual unrolled graph networks mimicking dual ascent."""

from dagnn.autodiff import Tape, Tensor, backward, finite_difference_check
from dagnn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from dagnn.config import RunConfig, parse_config
from dagnn.dataset import Manifest, build_dataset, load_split, solve_dataset
from dagnn.evaluation import (
    EvalConfig,
    LayerwiseReport,
    Model,
    SweepSpec,
    TestMetrics,
    layerwise_metrics,
    ood_sweep,
    test_metrics,
)
from dagnn.exceptions import (
    ConfigError,
    ContractError,
    DAGNNError,
    DataError,
    DimensionError,
    DivergenceError,
    InstanceInvalid,
    SelfTestFailure,
    SizeLimitExceeded,
)
from dagnn.gnn import (
    DualParams,
    ModelConfig,
    PrimalParams,
    Trajectory,
    coupled_forward,
    init_params,
    primal_forward,
)
from dagnn.oracle import (
    DAConfig,
    OracleSolution,
    active_set_enumerate,
    dual_ascent,
    kkt_residuals,
)
from dagnn.problem import (
    InstanceDistributionConfig,
    MIQPInstance,
    RelaxedQP,
    generate_instance,
    lagrangian,
    relax,
)
from dagnn.report import emit_report
from dagnn.training import (
    MetaDuals,
    TrainConfig,
    TrainState,
    alternate_train,
    collect_multiplier_pool,
    dual_training_step,
    primal_training_step,
)


__all__ = [
    "Checkpoint",
    "ConfigError",
    "ContractError",
    "DAConfig",
    "DAGNNError",
    "DataError",
    "DimensionError",
    "DivergenceError",
    "DualParams",
    "EvalConfig",
    "InstanceDistributionConfig",
    "InstanceInvalid",
    "LayerwiseReport",
    "MIQPInstance",
    "Manifest",
    "MetaDuals",
    "Model",
    "ModelConfig",
    "OracleSolution",
    "PrimalParams",
    "RelaxedQP",
    "RunConfig",
    "SelfTestFailure",
    "SizeLimitExceeded",
    "SweepSpec",
    "Tape",
    "Tensor",
    "TestMetrics",
    "TrainConfig",
    "TrainState",
    "Trajectory",
    "active_set_enumerate",
    "alternate_train",
    "backward",
    "build_dataset",
    "collect_multiplier_pool",
    "coupled_forward",
    "dual_ascent",
    "dual_training_step",
    "emit_report",
    "finite_difference_check",
    "generate_instance",
    "init_params",
    "kkt_residuals",
    "lagrangian",
    "layerwise_metrics",
    "load_checkpoint",
    "load_split",
    "ood_sweep",
    "parse_config",
    "primal_forward",
    "primal_training_step",
    "relax",
    "save_checkpoint",
    "solve_dataset",
    "test_metrics",
]
