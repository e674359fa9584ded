"""Trace-driven simulator and policy library for cost-minimal scheduling of a
deadline-constrained job across spot and on-demand cloud instances."""

from .core import (
    CostModel,
    Job,
    ProgressState,
    Rental,
    SpotTrace,
    critical_threshold,
    point_of_no_return_reached,
    slack,
    theoretical_cr_lower_bound,
    theoretical_cr_ross,
)
from .engine import (
    DeadlineViolated,
    ExecutionLog,
    RunStats,
    SimConfig,
    TraceTooShort,
    run,
    run_monte_carlo,
    total_cost,
    verify_log,
    write_log_csv,
)
from .policies import (
    Action,
    DecisionContext,
    GreedyPolicy,
    OnDemandPolicy,
    POLICY_IDS,
    RossPolicy,
    RossState,
    UniformProgressPolicy,
    make_policy,
    sample_interval,
)

__all__ = [name for name in dir() if not name.startswith("_")]
