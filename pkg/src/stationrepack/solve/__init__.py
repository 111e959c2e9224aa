from .portfolio import run_portfolio
from .solvers import (
    OracleTooLarge,
    brute_force,
    greedy_check,
    run_config,
    solve_complete,
    solve_local,
)
from .types import CancelToken, Portfolio, SolverConfig, SolverResult, Status, default_portfolio

__all__ = [
    "CancelToken",
    "OracleTooLarge",
    "Portfolio",
    "SolverConfig",
    "SolverResult",
    "Status",
    "brute_force",
    "default_portfolio",
    "greedy_check",
    "run_config",
    "run_portfolio",
    "solve_complete",
    "solve_local",
]
