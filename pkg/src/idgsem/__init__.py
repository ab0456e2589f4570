"""Implicit discontinuous Galerkin spectral element schemes for 1D scalar conservation laws.

Backward-Euler and space-time discretizations with entropy-conservative
volume fluxes, bound-preserving and entropy-stable graph viscosity, Newton
and Picard solvers, reference solutions and a verification suite.
"""

from .basis import LobattoBasis, build_basis
from .physics import Problem, make_problem
from .solver import RunReport, Setup, SolverConfig, SolverError, advance, make_setup

__version__ = "0.1.0"

__all__ = [
    "LobattoBasis",
    "Problem",
    "RunReport",
    "Setup",
    "SolverConfig",
    "SolverError",
    "advance",
    "build_basis",
    "make_problem",
    "make_setup",
]
