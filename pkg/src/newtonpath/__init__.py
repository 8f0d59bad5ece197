"""Continuation Newton methods for regularized empirical risk minimization.

Solve a path of objectives over growing sample prefixes with proportionally
shrinking l2 regularization, so each stage's minimizer lands inside the next
stage's quadratic-convergence region. Includes a damped Newton solver, a
data-adaptive growth rule based on a retained-Hessian decrement estimate, a
continuation L-BFGS variant, a SAGA baseline, and a benchmark harness.
"""

from .accounting import WorkMeter, effective_epoch_cost
from .baselines import SagaResult, saga_run
from .continuation import (ContinuationConfig, DynaResult, GeneralizationBound,
                           GradientCache, GrowthDecision, HandoverViolationError,
                           StageRecord, alpha_star, apriori_schedule, dyna_newton,
                           extended_gradient, find_growth, nu_lower_bound,
                           nu_lower_bound_apriori, taylor_decrement_estimate)
from .dataset import (BENCHMARK_SPECS, Dataset, PrefixView, SvmlightParseError,
                      benchmark_dataset, load_svmlight, parse_svmlight,
                      synthesize_logistic, synthesize_onehot_classification,
                      synthesize_sparse_classification, train_test_split,
                      write_svmlight)
from .lbfgs import (LbfgsConfig, LbfgsMemory, LbfgsResult, dyna_lbfgs,
                    lbfgs_minimize, two_loop_direction)
from .linalg import (SingularHessianError, SpdFactorization, factor_spd,
                     quad_form_inv, solve)
from .newton import (LineSearchStallError, MinimizeResult, NewtonConfig,
                     NewtonStepReport, decrement, decrement_from, minimize,
                     newton_step)
from .objective import EvalReport, LossKind, RegularizedObjective

__version__ = "0.1.0"

__all__ = [
    "WorkMeter", "effective_epoch_cost",
    "SagaResult", "saga_run",
    "ContinuationConfig", "DynaResult", "GeneralizationBound", "GradientCache",
    "GrowthDecision", "HandoverViolationError", "StageRecord", "alpha_star",
    "apriori_schedule", "dyna_newton", "extended_gradient", "find_growth",
    "nu_lower_bound", "nu_lower_bound_apriori", "taylor_decrement_estimate",
    "BENCHMARK_SPECS", "Dataset", "PrefixView", "SvmlightParseError",
    "benchmark_dataset", "load_svmlight", "parse_svmlight",
    "synthesize_logistic", "synthesize_onehot_classification",
    "synthesize_sparse_classification", "train_test_split", "write_svmlight",
    "LbfgsConfig", "LbfgsMemory", "LbfgsResult", "dyna_lbfgs", "lbfgs_minimize",
    "two_loop_direction",
    "SingularHessianError", "SpdFactorization", "factor_spd", "quad_form_inv", "solve",
    "LineSearchStallError", "MinimizeResult", "NewtonConfig", "NewtonStepReport",
    "decrement", "decrement_from", "minimize", "newton_step",
    "EvalReport", "LossKind", "RegularizedObjective",
]
