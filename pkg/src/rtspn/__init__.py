"""Feasibility checks, a two-resource reduction and debt-based scheduling
for frame-based real-time processing networks with exponential job sizes."""

from .feasibility import (
    FeasibilityVerdict,
    check,
    check_single_resource,
    check_two_resource,
    implied_workload,
)
from .idle import IdleEstimate, idle_time_expected, idle_time_monte_carlo, residual_deficit
from .lp import LinearProgram, lp_max
from .model import (
    EveryFrame,
    IndependentBernoulli,
    MarkovArrivals,
    SubsetDistribution,
    SystemSpec,
    TaskSpec,
    load_spec,
    validate_spec,
)
from .policy import DebtLedger, ldf_order, ltdf_select, make_policy
from .reduction import ReducedSystem, decision_correspondence, lift_throughputs, reduce
from .simulator import RunMetrics, coupled_run, replicate, run

__all__ = [
    "FeasibilityVerdict", "check", "check_single_resource", "check_two_resource", "implied_workload",
    "IdleEstimate", "idle_time_expected", "idle_time_monte_carlo", "residual_deficit",
    "LinearProgram", "lp_max",
    "EveryFrame", "IndependentBernoulli", "MarkovArrivals", "SubsetDistribution", "SystemSpec", "TaskSpec",
    "load_spec", "validate_spec",
    "DebtLedger", "ldf_order", "ltdf_select", "make_policy",
    "ReducedSystem", "decision_correspondence", "lift_throughputs", "reduce",
    "RunMetrics", "coupled_run", "replicate", "run",
]
