"""Exact and approximate Gaussian process regression with phase-timed benchmarking."""

from .data import Dataset, SyntheticSpec, generate_synthetic, load_csv, standardize
from .exact import (
    CholeskyError,
    ExactModel,
    PredictiveDistribution,
    exact_logml,
    exact_predict,
    exact_train,
    jitter_cholesky,
)
from .fitc import FitcModel, fitc_kernel_eval, fitc_logml, fitc_predict, fitc_train, hybrid_train
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    MethodSpec,
    compare_fixed_vs_learned,
    emit_results,
    emit_trace,
    load_dataset,
    run_cg_trace,
    run_experiment,
)
from .iterative import (
    CGBreakdown,
    DenseKernelOperator,
    MatrixOperator,
    MvmOperator,
    SolveTrace,
    Termination,
    cg_solve,
    mean_from_alpha,
    preflight,
)
from .kernel import Hyperparameters, kernel_eval, kernel_matrix, kernel_matrix_grad
from .local import LocalModel, local_logml_joint, local_logml_separate, local_predict, local_train
from .metrics import TrivialPredictor, msll, smse
from .optimizer import OptBudget, OptResult, default_hyperparameters, maximize_logml
from .selection import RpcTree, SubsetChoice, build_rpc, rpc_assign, select_fpc, select_random
from .sod import SodModel, sod_logml, sod_predict, sod_train

__version__ = "0.1.0"
