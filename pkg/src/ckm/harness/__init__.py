from .experiment import ExperimentReport, Record, load_config, parse_config, run_experiment, run_solver
from .generators import (
    gen_centered_instance,
    gen_dominating_set_reduction,
    gen_random_instance,
    gen_random_tree_instance,
    graph_family,
    has_dominating_set,
)

__all__ = [
    "ExperimentReport", "Record", "load_config", "parse_config", "run_experiment", "run_solver",
    "gen_centered_instance", "gen_dominating_set_reduction", "gen_random_instance",
    "gen_random_tree_instance", "graph_family", "has_dominating_set",
]
