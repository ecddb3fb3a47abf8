"""
KKT optimality certificates.

An MLE over a convex exponential family is certified by three checks:
primal feasibility (the canonical parameter satisfies the MTP2 constraints),
dual feasibility (fitted minus empirical mass lies in the dual cone) and
complementary slackness (their inner product vanishes).
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import TYPE_CHECKING, Any, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from scipy.optimize import nnls

from mtp2_ising.config import Tolerances, config
from mtp2_ising.errors import DimensionError, SupportError
from mtp2_ising.ising import Graph
from mtp2_ising.states import StateSet, check_dim, elementary_index, is_lattice
from mtp2_ising.tables import Moments, ProbTable, SampleCounts

if TYPE_CHECKING:
    from mtp2_ising.solvers.base import FitResult

logger = logging.getLogger(__name__)

MASS_TOL = 1e-9
EDGE_TOL = 1e-9


def _subset_label(mask: int, dim: int) -> str:
    return ",".join(str(k + 1) for k in range(dim) if mask >> k & 1)


class Imset(BaseModel):
    """Integer-valued function on {-1,1}^d with finite support, keyed by state mask."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1)
    entries: dict[int, int]

    @model_validator(mode="after")
    def _check_entries(self) -> Imset:
        top = 1 << self.dim
        if any(not 0 <= m < top for m in self.entries):
            raise ValueError(f"imset keys out of range for d={self.dim}")
        return self

    @classmethod
    def elementary(cls, dim: int, i: int, j: int, context: int) -> Imset:
        """u_{i,j|A}: +1 at A and A+ij, -1 at A+i and A+j (0-indexed i, j; A a mask)."""
        bi, bj = 1 << i, 1 << j
        if i == j or context & (bi | bj):
            raise ValueError("context must avoid i and j, and i != j")
        return cls(
            dim=dim,
            entries={context: 1, context | bi | bj: 1, context | bi: -1, context | bj: -1},
        )

    @classmethod
    def semi_elementary(cls, dim: int, x: int, y: int) -> Imset:
        """u_{x,y}: +1 at x meet y and x join y, -1 at x and y."""
        entries: dict[int, int] = {}
        for mask, sign in ((x & y, 1), (x | y, 1), (x, -1), (y, -1)):
            entries[mask] = entries.get(mask, 0) + sign
        return cls(dim=dim, entries={m: v for m, v in entries.items() if v})

    def as_vector(self) -> np.ndarray:
        v = np.zeros(1 << self.dim)
        for mask, value in self.entries.items():
            v[mask] = value
        return v

    def inner(self, theta: Any) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        return float(sum(value * theta[mask] for mask, value in self.entries.items()))

    @property
    def label(self) -> str:
        """u{i,j|A} with 1-indexed vertices for elementary imsets."""
        pos = [m for m, v in self.entries.items() if v > 0]
        neg = [m for m, v in self.entries.items() if v < 0]
        if len(pos) == 2 and len(neg) == 2:
            bottom, top = min(pos), max(pos)
            diff = top ^ bottom
            if bin(diff).count("1") == 2:
                i, j = (k + 1 for k in range(self.dim) if diff >> k & 1)
                return f"u{{{i},{j}|{_subset_label(bottom, self.dim)}}}"
        return "u" + str(dict(sorted(self.entries.items())))


def elementary_imsets(d: int) -> list[Imset]:
    """One imset per elementary pair, ordered by (i, j) then context."""
    idx = elementary_index(d)
    return [
        Imset.elementary(d, int(i), int(j), int(a))
        for i, j, a in zip(idx.i, idx.j, idx.bottom)
    ]


@lru_cache(maxsize=4)
def _elementary_matrix(d: int) -> np.ndarray:
    idx = elementary_index(d)
    k = np.arange(idx.i.size)
    G = np.zeros((idx.i.size, 1 << d))
    G[k, idx.bottom] = 1
    G[k, idx.top] = 1
    G[k, idx.with_i] = -1
    G[k, idx.with_j] = -1
    G.setflags(write=False)
    return G


def _elementary_label(idx: Any, k: int) -> str:
    d = int(idx.top.max()).bit_length()
    context = _subset_label(int(idx.bottom[k]), d)
    return f"u{{{int(idx.i[k]) + 1},{int(idx.j[k]) + 1}|{context}}}"


def supermodularity_values(theta: Any) -> np.ndarray:
    """theta(A) + theta(A+ij) - theta(A+i) - theta(A+j) for every elementary imset."""
    theta = np.asarray(theta, dtype=np.float64)
    d = int(theta.size).bit_length() - 1
    if theta.ndim != 1 or theta.size != 1 << d:
        raise DimensionError(f"theta needs 2^d entries, got {theta.size}")
    idx = elementary_index(d)
    return theta[idx.bottom] + theta[idx.top] - theta[idx.with_i] - theta[idx.with_j]


class LatticeConstraints(NamedTuple):
    """Constraint rows over positions in a support; row k reads s[bottom]+s[top]-s[x]-s[y]."""

    support: np.ndarray
    bottom: np.ndarray
    top: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return int(self.bottom.size)

    def values(self, theta: np.ndarray) -> np.ndarray:
        return theta[self.bottom] + theta[self.top] - theta[self.x] - theta[self.y]

    def matrix(self) -> np.ndarray:
        G = np.zeros((len(self), self.support.size))
        k = np.arange(len(self))
        np.add.at(G, (k, self.bottom), 1)
        np.add.at(G, (k, self.top), 1)
        np.add.at(G, (k, self.x), -1)
        np.add.at(G, (k, self.y), -1)
        return G


def lattice_constraints(support: StateSet) -> LatticeConstraints:
    """
    MTP2 constraints of the family supported on a lattice.

    On the full cube the elementary pairs suffice; on a proper sublattice every
    incomparable pair contributes one constraint.
    """
    masks = support.as_mask_array()
    if support.is_full() and support.dim >= 2:
        idx = elementary_index(support.dim)
        return LatticeConstraints(masks, idx.bottom, idx.top, idx.with_i, idx.with_j)
    if not is_lattice(support):
        raise SupportError("constraints need a support closed under meet and join")
    pos = np.full(1 << support.dim, -1, dtype=np.int64)
    pos[masks] = np.arange(masks.size)
    a, b = np.triu_indices(masks.size, k=1)
    xm, ym = masks[a], masks[b]
    meet, join = xm & ym, xm | ym
    incomparable = (meet != xm) & (meet != ym)
    a, b = a[incomparable], b[incomparable]
    return LatticeConstraints(
        masks, pos[meet[incomparable]], pos[join[incomparable]], a, b
    )


class ConeMembership(NamedTuple):
    coefficients: np.ndarray
    residual: float


def cone_membership(v: Any, generators: np.ndarray | None = None) -> ConeMembership:
    """
    Distance from v to the cone spanned by the generator rows (elementary imsets by default).

    Solved by nonnegative least squares; v with nonzero entry sum is reported
    outside the cone without solving.
    """
    v = np.asarray(v, dtype=np.float64)
    if generators is None:
        d = int(v.size).bit_length() - 1
        check_dim(d, config.certify_max_dim)
        generators = _elementary_matrix(d)
    if abs(float(v.sum())) > MASS_TOL:
        return ConeMembership(np.zeros(generators.shape[0]), float(np.linalg.norm(v)))
    if not np.any(v):
        return ConeMembership(np.zeros(generators.shape[0]), 0.0)
    coef, residual = nnls(generators.T, v, maxiter=50 * generators.shape[0])
    return ConeMembership(coef, float(residual))


class KktCertificate(BaseModel):
    """Residuals of the optimality conditions and their verdicts."""

    model_config = ConfigDict(frozen=True)

    kind: str
    primal_residual: float = Field(description="Most negative constraint value")
    dual_residual: float = Field(description="Cone distance, or most negative moment slack")
    slackness_residual: float
    moment_residual: float
    primal_ok: bool
    dual_ok: bool
    slackness_ok: bool
    moment_ok: bool
    decomposition: list[tuple[str, float]] = Field(default_factory=list)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return self.primal_ok and self.dual_ok and self.slackness_ok and self.moment_ok


def _certify_cone(
    theta: np.ndarray,
    v: np.ndarray,
    constraints: LatticeConstraints,
    tol: Tolerances,
    kind: str,
    labeled: bool = False,
) -> KktCertificate:
    values = constraints.values(theta)
    primal = float(values.min()) if values.size else 0.0
    if len(constraints):
        coef, residual = cone_membership(v, constraints.matrix())
    else:
        coef, residual = np.zeros(0), float(np.linalg.norm(v))
    slack = abs(float(theta @ v))
    mass = abs(float(v.sum()))
    decomposition = []
    if labeled:
        idx = elementary_index(int(theta.size).bit_length() - 1)
        decomposition = [
            (_elementary_label(idx, int(k)), float(coef[k])) for k in np.flatnonzero(coef > 1e-12)
        ]
    logger.debug(
        "%s certificate: primal=%.3e dual=%.3e slack=%.3e", kind, primal, residual, slack
    )
    return KktCertificate(
        kind=kind,
        primal_residual=primal,
        dual_residual=residual,
        slackness_residual=slack,
        moment_residual=mass,
        primal_ok=primal >= -tol.primal,
        dual_ok=residual <= tol.dual,
        slackness_ok=slack <= tol.slack,
        moment_ok=mass <= tol.dual,
        decomposition=decomposition,
    )


def certify_general(
    p_hat: ProbTable, c: SampleCounts, tol: Tolerances | None = None
) -> KktCertificate:
    """
    Certify p_hat as the binary MTP2 MLE of the sample.

    With full support the generators are the elementary imsets. Otherwise the
    support must be a lattice containing every observed state, and the
    certificate is checked for the family restricted to it.

    Raises:
        DimensionError: If dimensions disagree or d exceeds the certification cap
        SupportError: If the support is not a lattice or misses an observed state
    """
    tol = tol or Tolerances()
    if p_hat.dim != c.dim:
        raise DimensionError(f"table d={p_hat.dim} vs sample d={c.dim}")
    check_dim(p_hat.dim, config.certify_max_dim)
    t_bar = c.counts / c.n

    if p_hat.has_full_support():
        theta = np.log(p_hat.values) - np.log(p_hat.values[0])
        v = p_hat.values - t_bar
        constraints = lattice_constraints(StateSet.full(p_hat.dim))
        return _certify_cone(theta, v, constraints, tol, "general", labeled=p_hat.dim >= 2)

    support = p_hat.support()
    missing = np.flatnonzero((c.counts > 0) & (p_hat.values <= 0))
    if missing.size:
        raise SupportError(f"observed states {missing.tolist()} have zero fitted mass")
    constraints = lattice_constraints(support)
    masks = constraints.support
    values = p_hat.values[masks]
    theta = np.log(values) - np.log(values[0])
    return _certify_cone(theta, values - t_bar[masks], constraints, tol, "general-restricted")


def certify_ising(
    result: FitResult, m: Moments, g: Graph, tol: Tolerances | None = None
) -> KktCertificate:
    """
    Certify an Ising fit on g against data moments (x-bar, M).

    primal: min over E of J-hat; dual: worst of the mean match and
    Sigma-hat - S over E; slackness: max over E of |(Sigma-hat - S) J-hat|.
    """
    tol = tol or Tolerances()
    J = result.params.J
    fitted = result.moments
    gap = fitted.covariance - m.covariance
    edges = g.edges
    mean_gap = float(np.max(np.abs(fitted.mean - m.mean)))
    primal = min((float(J[u, v]) for u, v in edges), default=0.0)
    dual = min([-mean_gap] + [float(gap[u, v]) for u, v in edges])
    slack = max((abs(float(gap[u, v] * J[u, v])) for u, v in edges), default=0.0)
    moment = max(
        [mean_gap] + [abs(float(gap[u, v])) for u, v in result.fitted_graph.edges]
    )
    logger.debug(
        "ising certificate: primal=%.3e dual=%.3e slack=%.3e moment=%.3e",
        primal,
        dual,
        slack,
        moment,
    )
    return KktCertificate(
        kind="ising",
        primal_residual=primal,
        dual_residual=dual,
        slackness_residual=slack,
        moment_residual=moment,
        primal_ok=primal >= -tol.primal,
        dual_ok=dual >= -tol.dual,
        slackness_ok=slack <= tol.slack,
        moment_ok=moment <= tol.dual,
    )


def fit_result_from_table(p: ProbTable, graph: Graph) -> FitResult:
    """
    Wrap an externally supplied full-support table so certify_ising can check it.

    The fitted graph holds the edges of `graph` with a positive interaction.
    """
    from mtp2_ising.ising import params_from_table
    from mtp2_ising.solvers.base import FitResult, SolverName
    from mtp2_ising.tables import moments_from_table

    params, _ = params_from_table(p)
    fitted_edges = [(u, v) for u, v in graph.edges if params.J[u, v] > EDGE_TOL]
    return FitResult(
        solver=SolverName.IPS,
        table=p,
        iterations=0,
        converged=True,
        graph=graph,
        fitted_graph=Graph(dim=graph.dim, edges=fitted_edges),
        params=params,
        moments=moments_from_table(p),
    )
