"""Dual-LP multiplicative-weights solver for finite-horizon deterministic DPs."""

from . import errors
from .kernel import DEFAULT_BACKEND, HAVE_COMPILED
from .model import (
    DpInstance,
    Policy,
    ValueTable,
    bellman_solve,
    brute_force_value,
    check_primal_feasibility,
    compute_rho,
    load_instance,
    make_homogeneous,
    make_instance,
    optimal_action_set,
    save_instance,
    validate_instance,
    value_bounds_hold,
)
from .mwu import compute_config, mw_run_generic, regret_audit, run_feasibility
from .oracle import ExactScan, QueryLedger, SigmaContext, SimulatedQmf, check_dual_feasibility, eval_f
from .solver import (
    SolveConfig,
    SolveReport,
    binary_search_sigma,
    extract_action,
    feasibility_at_sigma,
    iteration_bound_report,
    solve_dp,
    solve_policy,
)

__version__ = "0.1.0"
