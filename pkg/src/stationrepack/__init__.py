"""Station repacking feasibility solver and reverse-auction simulator."""

from ._kernels import BACKEND
from .model import (
    Band,
    InterferenceData,
    RepackingInstance,
    band,
    build_instance,
    generate_synthetic,
    load_instance_file,
    load_interference,
    make_instance,
    verify_assignment,
)
from .encode import decode, encode
from .simplify import simplify
from .solve import Portfolio, SolverConfig, SolverResult, Status, default_portfolio, run_portfolio
from .cache import ContainmentCache, cached_solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Band",
    "ContainmentCache",
    "InterferenceData",
    "Portfolio",
    "RepackingInstance",
    "SolverConfig",
    "SolverResult",
    "Status",
    "band",
    "build_instance",
    "cached_solve",
    "decode",
    "default_portfolio",
    "encode",
    "generate_synthetic",
    "load_instance_file",
    "load_interference",
    "make_instance",
    "run_portfolio",
    "simplify",
    "verify_assignment",
]
