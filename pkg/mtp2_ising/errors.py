"""Exception hierarchy for mtp2-ising."""


class Mtp2Error(Exception):
    """Base exception for all mtp2-ising errors."""

    pass


class DimensionError(Mtp2Error):
    """Raised when dimensions disagree or exceed the dense-table cap."""

    pass


class SupportError(Mtp2Error):
    """Raised when an operation needs positive probability where there is none."""

    pass


class InconsistentMomentsError(Mtp2Error):
    """Raised when moments imply a negative pair probability."""

    pass


class LambdaSolveError(Mtp2Error):
    """Raised when the clamped update cannot be solved."""

    pass


class SampleFormatError(Mtp2Error):
    """Raised for malformed sample, graph or table files."""

    pass


class ExistenceError(Mtp2Error):
    """
    Raised when the sample violates an MLE-existence condition.

    Attributes:
        edges: Offending vertex pairs, 1-indexed
        vertices: Offending vertices (constant coordinates), 1-indexed
    """

    def __init__(
        self,
        message: str,
        edges: list[tuple[int, int]] | None = None,
        vertices: list[int] | None = None,
    ) -> None:
        super().__init__(message)
        self.edges = edges or []
        self.vertices = vertices or []


class ConvergenceError(Mtp2Error):
    """Raised when an estimator returns without reaching its optimality conditions."""

    pass
