"""Cost-based budget active learning (CBAL) with baseline query strategies."""

from .data import Budget, Dataset, PoolState, apply_standardizer, fit_standardizer, init_pools, load_csv, split
from .estimators import EstimatorSpec, LossMatrix, decide, fit, refit_with
from .loop import LearningCurve, RunConfig, evaluate, run_experiment, run_round
from .strategy import (
    CostModel,
    KernelSpec,
    baseline_select,
    correlation,
    cost_score,
    expected_pool_risk,
    resolve_bandwidth,
    select_candidates,
    select_from_candidates,
    uncertainty,
)

__version__ = "0.1.0"
