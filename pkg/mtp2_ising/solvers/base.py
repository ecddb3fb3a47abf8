"""Base solver interface and normalized result contract."""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from mtp2_ising.ising import Graph, IsingParams
from mtp2_ising.states import StateSet
from mtp2_ising.tables import Moments, ProbTable, SampleCounts


class SolverName(str, Enum):
    """Supported estimators."""

    IPS = "ips"
    SYMMETRIC = "symmetric"
    CLASSICAL = "classical"
    GENERAL = "general"


class SolverResult(BaseModel):
    """Normalized result from any solver."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    solver: SolverName
    table: ProbTable
    iterations: int = Field(ge=0, description="Sweeps (IPS) or Newton steps (general)")
    converged: bool
    log_likelihood: float | None = Field(default=None, description="sum_x n(x) log p(x)")
    message: str | None = Field(default=None, description="Diagnostics on non-convergence")

    @property
    def dim(self) -> int:
        return self.table.dim


class FitResult(SolverResult):
    """Ising fit: table, estimated graph (V, E-hat), canonical and mean parameters."""

    graph: Graph
    fitted_graph: Graph
    params: IsingParams
    moments: Moments

    @property
    def covariance(self) -> Any:
        return self.moments.covariance


class GeneralFit(SolverResult):
    """Unrestricted binary MTP2 fit on the lattice closure of the sample."""

    support: StateSet
    active_constraints: int = Field(ge=0)


class BaseSolver(ABC):
    """Abstract base class for MTP2 estimators."""

    name: SolverName
    description: str = ""

    @abstractmethod
    def check(self, counts: SampleCounts, graph: Graph) -> None:
        """
        Verify the existence precondition for this estimator.

        Raises:
            ExistenceError: If the MLE does not exist (or lacks full support)
        """
        pass

    @abstractmethod
    def fit(self, counts: SampleCounts, graph: Graph) -> SolverResult:
        """
        Compute the MLE.

        Args:
            counts: Sample counts
            graph: Graph restricting the interactions; ignored by the general solver

        Returns:
            Normalized SolverResult

        Raises:
            ExistenceError: If the precondition fails
        """
        pass
