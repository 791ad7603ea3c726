"""Partition-of-unity networks with polynomial heads.

A POU net approximates y(x) = sum_a phi_a(x) * p_a(x), where phi is a
learned partition of unity (a normalized radial-basis layer or a residual
network with a softmax head) and each p_a is a polynomial of bounded
degree. Polynomial coefficients are obtained by linear least squares;
partition parameters are trained by gradient descent between solves.
"""

from .domain import Box, symmetric_box, unit_box
from .linalg import DenseMatrix, matmul, solve_least_squares
from .poly import MonomialBasis, basis_dim, monomial_exponents
from .pou import (
    RbfNet,
    ResNetPou,
    eval_partitions,
    grad_partitions,
    init_rbf,
    init_resnet_box,
    net_from_manifest,
)
from .model import (
    Dataset,
    PouModel,
    design_matrix,
    init_coeffs,
    load_checkpoint,
    loss,
    loss_grad_xi,
    predict,
    save_checkpoint,
)
from .optim import (
    AdamState,
    LsgdConfig,
    TrainingError,
    TrainReport,
    adam_step,
    detect_collapse,
    lsgd,
    two_phase_lsgd,
)
from .bench import (
    IndicatorPartition,
    ScalarResNet,
    TargetFunction,
    baseline_resnet_fit,
    fit_loglog_slope,
    init_scalar_resnet,
    make_cross_dataset,
    make_wave_dataset,
    partition_diagnostics,
    relative_l2,
    rms,
    sine_cross,
    theorem1_scaling_oracle,
    tri_wave,
    tri_wave_squared,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    artifact_fingerprint,
    load_config,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Box",
    "ConfigError",
    "Dataset",
    "DenseMatrix",
    "ExperimentConfig",
    "IndicatorPartition",
    "LsgdConfig",
    "MonomialBasis",
    "PouModel",
    "RbfNet",
    "ResNetPou",
    "ScalarResNet",
    "TargetFunction",
    "TrainReport",
    "TrainingError",
    "adam_step",
    "artifact_fingerprint",
    "baseline_resnet_fit",
    "basis_dim",
    "design_matrix",
    "detect_collapse",
    "eval_partitions",
    "fit_loglog_slope",
    "grad_partitions",
    "init_coeffs",
    "init_rbf",
    "init_resnet_box",
    "init_scalar_resnet",
    "load_checkpoint",
    "load_config",
    "loss",
    "loss_grad_xi",
    "lsgd",
    "make_cross_dataset",
    "make_wave_dataset",
    "matmul",
    "monomial_exponents",
    "net_from_manifest",
    "partition_diagnostics",
    "predict",
    "relative_l2",
    "rms",
    "run_experiment",
    "save_checkpoint",
    "sine_cross",
    "solve_least_squares",
    "symmetric_box",
    "theorem1_scaling_oracle",
    "tri_wave",
    "tri_wave_squared",
    "two_phase_lsgd",
    "unit_box",
]
