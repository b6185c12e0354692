"""Stochastic nested ADMM for linearly constrained two-level composition problems."""
from .diagnostics import (
    StationarityTriple,
    TraceRecord,
    augmented_lagrangian,
    finite_diff_gradient,
    lagrangian_subgrad_dist,
    potential,
    stationarity,
)
from .estimator import NestedADMM
from .estimators import (
    BatchPlan,
    EstimatorState,
    empirical_mse,
    minibatch_step,
    spider_recurse,
    spider_refresh,
    variance_bound_minibatch,
    variance_bound_spider,
)
from .generators import GeneratorSpec, generate_instance
from .problem import (
    ProblemInstance,
    SmoothnessProfile,
    SpectralSummary,
    estimate_profile,
    eval_f1,
    eval_grad_f2,
    eval_jac_f1,
    exact_nested_gradient,
    full_objective,
    spectral_bounds,
)
from .prox import Regularizer, eval_reg, prox, subdiff_distance
from .solver import IterateState, SolverConfig, SolveReport, calibrate, run, update_x, update_y_block, update_z

__version__ = "0.1.0"
