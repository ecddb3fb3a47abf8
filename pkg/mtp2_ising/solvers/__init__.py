"""Estimator implementations for MTP2 binary models."""

from mtp2_ising.solvers.base import BaseSolver, FitResult, GeneralFit, SolverName, SolverResult
from mtp2_ising.solvers.general_mle import GeneralSolver
from mtp2_ising.solvers.ips import ClassicalIpsSolver, IpsSolver, SymmetricIpsSolver

__all__ = [
    "BaseSolver",
    "SolverName",
    "SolverResult",
    "FitResult",
    "GeneralFit",
    "IpsSolver",
    "SymmetricIpsSolver",
    "ClassicalIpsSolver",
    "GeneralSolver",
]
