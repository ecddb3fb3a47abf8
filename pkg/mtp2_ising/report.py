"""Structured run report with deterministic text rendering."""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mtp2_ising.certify import KktCertificate
from mtp2_ising.ising import Graph
from mtp2_ising.solvers.base import FitResult, GeneralFit, SolverResult
from mtp2_ising.tables import ProbTable, lattice_order

TABLE_MAX_DIM = 12
ZERO_PRINT = 5e-13


class TableRow(BaseModel):
    mask: int
    subset: str
    probability: float


class LikelihoodRatio(BaseModel):
    """Unrestricted versus MTP2 Ising fit on the same graph."""

    loglik_mtp2: float
    loglik_unrestricted: float | None = None
    statistic: float | None = None
    note: str | None = None


class Report(BaseModel):
    """Everything one run produced; field order is the rendering order."""

    model_config = ConfigDict(frozen=True)

    command: str
    status: str
    exit_code: int
    dim: int | None = None
    n: int | None = None
    seed: int | None = None
    solver: str | None = None
    converged: bool | None = None
    iterations: int | None = None
    log_likelihood: float | None = None
    edges: list[tuple[int, int]] | None = None
    fitted_edges: list[tuple[int, int]] | None = None
    offending_edges: list[tuple[int, int]] = Field(default_factory=list)
    offending_vertices: list[int] = Field(default_factory=list)
    support_size: int | None = None
    active_constraints: int | None = None
    h: list[float] | None = None
    J: list[list[float]] | None = None
    mu: list[float] | None = None
    xi: list[list[float]] | None = None
    sigma: list[list[float]] | None = None
    certificate: KktCertificate | None = None
    likelihood_ratio: LikelihoodRatio | None = None
    mtp2: bool | None = None
    violations: list[str] = Field(default_factory=list)
    table: list[TableRow] | None = None
    messages: list[str] = Field(default_factory=list)

    def render(self) -> str:
        return render_text(self)


def subset_label(mask: int, dim: int) -> str:
    """'{1,3}' style label of the coordinates equal to +1."""
    return "{" + ",".join(str(k + 1) for k in range(dim) if mask >> k & 1) + "}"


def table_rows(p: ProbTable) -> list[TableRow]:
    """Table entries in graded lattice order."""
    return [
        TableRow(mask=m, subset=subset_label(m, p.dim), probability=float(p.values[m]))
        for m in lattice_order(p.dim)
    ]


def _matrix(a: Any) -> list[list[float]]:
    return np.asarray(a, dtype=np.float64).tolist()


def _edge_list(g: Graph) -> list[tuple[int, int]]:
    return g.one_indexed()


def result_fields(result: SolverResult) -> dict[str, Any]:
    """Report fields shared by every solver result."""
    fields: dict[str, Any] = {
        "dim": result.dim,
        "solver": result.solver.value,
        "converged": result.converged,
        "iterations": result.iterations,
        "log_likelihood": result.log_likelihood,
    }
    if result.message:
        fields["messages"] = [result.message]
    if result.dim <= TABLE_MAX_DIM:
        fields["table"] = table_rows(result.table)
    if isinstance(result, FitResult):
        fields.update(
            edges=_edge_list(result.graph),
            fitted_edges=_edge_list(result.fitted_graph),
            h=result.params.h.tolist(),
            J=_matrix(result.params.J),
            mu=result.moments.mean.tolist(),
            xi=_matrix(result.moments.second),
            sigma=_matrix(result.moments.covariance),
        )
    elif isinstance(result, GeneralFit):
        fields.update(
            support_size=len(result.support),
            active_constraints=result.active_constraints,
        )
    return fields


def _num(x: float | None, fmt: str = ".12f") -> str:
    if x is None:
        return "none"
    if not np.isfinite(x):
        return str(x)
    if abs(x) < ZERO_PRINT and fmt == ".12f":
        x = 0.0
    return format(x + 0.0, fmt)


def _edges(edges: list[tuple[int, int]]) -> str:
    return " ".join(f"{i}-{j}" for i, j in edges) if edges else "none"


def _block(name: str, rows: list[list[float]]) -> list[str]:
    lines = [f"{name}:"]
    lines += ["  " + " ".join(_num(v) for v in row) for row in rows]
    return lines


def render_text(report: Report) -> str:
    """Render as 'key: value' lines and indented matrix blocks."""
    lines = [
        f"command: {report.command}",
        f"status: {report.status}",
        f"exit_code: {report.exit_code}",
    ]
    scalars = [
        ("d", report.dim),
        ("n", report.n),
        ("seed", report.seed),
        ("solver", report.solver),
        ("converged", None if report.converged is None else str(report.converged).lower()),
        ("iterations", report.iterations),
        ("support_size", report.support_size),
        ("active_constraints", report.active_constraints),
        ("mtp2", None if report.mtp2 is None else str(report.mtp2).lower()),
    ]
    lines += [f"{key}: {value}" for key, value in scalars if value is not None]
    if report.log_likelihood is not None:
        lines.append(f"log_likelihood: {_num(report.log_likelihood)}")
    if report.edges is not None:
        lines.append(f"edges: {_edges(report.edges)}")
    if report.fitted_edges is not None:
        lines.append(f"fitted_edges: {_edges(report.fitted_edges)}")
    if report.offending_edges:
        lines.append(f"offending_edges: {_edges(report.offending_edges)}")
    if report.offending_vertices:
        lines.append("offending_vertices: " + " ".join(map(str, report.offending_vertices)))

    if report.h is not None:
        lines.append("h: " + " ".join(_num(v) for v in report.h))
    if report.J is not None:
        lines += _block("J", report.J)
    if report.mu is not None:
        lines.append("mu: " + " ".join(_num(v) for v in report.mu))
    if report.xi is not None:
        lines += _block("xi", report.xi)
    if report.sigma is not None:
        lines += _block("sigma", report.sigma)

    if (cert := report.certificate) is not None:
        lines += [
            f"certificate.kind: {cert.kind}",
            f"certificate.passed: {str(cert.passed).lower()}",
            f"certificate.primal_residual: {_num(cert.primal_residual, '.6e')}",
            f"certificate.dual_residual: {_num(cert.dual_residual, '.6e')}",
            f"certificate.slackness_residual: {_num(cert.slackness_residual, '.6e')}",
            f"certificate.moment_residual: {_num(cert.moment_residual, '.6e')}",
        ]
        lines += [
            f"certificate.decomposition: {label} {_num(coef, '.12g')}"
            for label, coef in cert.decomposition
        ]

    if (lr := report.likelihood_ratio) is not None:
        lines.append(f"lr.loglik_mtp2: {_num(lr.loglik_mtp2)}")
        if lr.loglik_unrestricted is not None:
            lines.append(f"lr.loglik_unrestricted: {_num(lr.loglik_unrestricted)}")
        if lr.statistic is not None:
            lines.append(f"lr.statistic: {_num(lr.statistic)}")
        if lr.note:
            lines.append(f"lr.note: {lr.note}")

    lines += [f"violation: {v}" for v in report.violations]

    if report.table is not None:
        lines.append("table:")
        lines += [
            f"  {row.mask} {row.subset} {_num(row.probability, '.17g')}" for row in report.table
        ]
    lines += [f"message: {m}" for m in report.messages]
    return "\n".join(lines) + "\n"
