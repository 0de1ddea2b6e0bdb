"""Gradient-based hyperparameter optimization via implicit differentiation.

Core pieces:
  * tape / programs   -- reverse-mode AD with exact Hessian- and mixed
                         second-order vector products
  * bilevel           -- problem container, SGD/Adam/RMSprop inner loop
  * ihvp              -- approximate inverse-Hessian-vector products
                         (identity, Neumann, CG, exact dense)
  * hypergradient     -- implicit and unrolled hypergradients, the outer
                         optimization loop, accuracy comparisons
  * problems          -- quadratic ground-truth problems, penalized models,
                         dataset distillation, data generators
  * experiments / cli -- config-driven experiment commands emitting CSV
"""

from .bilevel import (
    BilevelProblem,
    OptimizerState,
    fixed_point_residual,
    inner_optimize,
    newton_refine,
    optimizer_step,
)
from .data import Dataset, concat_datasets, empty_dataset, split_dataset, with_intercept_column
from .errors import (
    CapacityError,
    ConfigError,
    CsvParseError,
    DimensionError,
    HypergradError,
    NumericError,
    ValidationError,
)
from .flat import FlatVector, Segment
from .hypergradient import (
    AccuracyRow,
    HoRun,
    HypergradReport,
    RunRecord,
    cosine_and_l2,
    hypergrad_accuracy,
    hypergradient,
    run_ho,
    unrolled_hypergradient,
)
from .experiments import (
    ExperimentConfig,
    parse_config,
    read_table,
    write_records,
    write_table,
)
from .ihvp import InverseStrategy, approx_ihvp, dense_hessian, dense_mixed
from .problems import (
    DistillationSpec,
    PenalizedModelSpec,
    QuadraticBilevelSpec,
    ZooEntry,
    distilled_points,
    exact_quadratic_hypergradient,
    gen_blobs,
    gen_regression,
    load_csv,
    make_distillation,
    make_penalized,
    make_quadratic,
    quadratic_lambda_star,
    random_quadratic,
    save_csv,
    zoo,
)
from .programs import (
    GradCheckReport,
    LossProgram,
    check_grad_fd,
    evaluate,
    grad_lam,
    grad_w,
    hvp,
    mixed_vjp,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyRow",
    "BilevelProblem",
    "CapacityError",
    "ConfigError",
    "CsvParseError",
    "Dataset",
    "DimensionError",
    "DistillationSpec",
    "ExperimentConfig",
    "FlatVector",
    "GradCheckReport",
    "HoRun",
    "HypergradError",
    "HypergradReport",
    "InverseStrategy",
    "LossProgram",
    "NumericError",
    "OptimizerState",
    "PenalizedModelSpec",
    "QuadraticBilevelSpec",
    "RunRecord",
    "Segment",
    "ValidationError",
    "ZooEntry",
    "approx_ihvp",
    "check_grad_fd",
    "concat_datasets",
    "cosine_and_l2",
    "dense_hessian",
    "dense_mixed",
    "distilled_points",
    "empty_dataset",
    "evaluate",
    "exact_quadratic_hypergradient",
    "fixed_point_residual",
    "gen_blobs",
    "gen_regression",
    "grad_lam",
    "grad_w",
    "hvp",
    "hypergrad_accuracy",
    "hypergradient",
    "inner_optimize",
    "load_csv",
    "make_distillation",
    "make_penalized",
    "make_quadratic",
    "mixed_vjp",
    "newton_refine",
    "optimizer_step",
    "parse_config",
    "quadratic_lambda_star",
    "random_quadratic",
    "read_table",
    "run_ho",
    "save_csv",
    "split_dataset",
    "unrolled_hypergradient",
    "with_intercept_column",
    "write_records",
    "write_table",
    "zoo",
]
