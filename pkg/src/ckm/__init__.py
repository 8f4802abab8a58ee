"""Capacitated k-median: exact transport, centered-instance FPT solvers, tree DP and an experiment harness."""
from .centered import CenteredInstance, build_buckets, build_centered
from .errors import CKMError, Infeasible, InvariantViolation, RefusedScale, StructuralError
from .fpt import solve_ckm, solve_nonuniform_centered, solve_uniform_centered
from .instance import Assignment, Instance, Metric, Solution, cost, metric_from_weighted_graph, validate_instance
from .oracle import exact_ckm, exact_uncap_kmedian
from .transport import TransportProblem, assign_open, optimal_mapping
from .tree import sample_frt, solve_logk, solve_tree_dp
from .uncap import UncapSolution, bicriteria_greedy, local_search_kmedian

__all__ = [
    "CenteredInstance", "build_buckets", "build_centered",
    "CKMError", "Infeasible", "InvariantViolation", "RefusedScale", "StructuralError",
    "solve_ckm", "solve_nonuniform_centered", "solve_uniform_centered",
    "Assignment", "Instance", "Metric", "Solution", "cost", "metric_from_weighted_graph",
    "validate_instance", "exact_ckm", "exact_uncap_kmedian",
    "TransportProblem", "assign_open", "optimal_mapping",
    "sample_frt", "solve_logk", "solve_tree_dp",
    "UncapSolution", "bicriteria_greedy", "local_search_kmedian",
]
