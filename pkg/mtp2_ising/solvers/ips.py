"""
Iterative proportional scaling for the MTP2 Ising MLE on a graph.

Each update fits one edge margin. When the plain update would push the
interaction negative, the margin is instead shifted by lambda/4 so that the
interaction lands exactly on zero and the edge leaves the fitted graph.
"""

import logging
import math
from collections.abc import Callable
from enum import Enum
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mtp2_ising.errors import ExistenceError, LambdaSolveError, SupportError
from mtp2_ising.ising import Edge, Graph, interaction_from_table, params_from_table
from mtp2_ising.solvers.base import BaseSolver, FitResult, SolverName
from mtp2_ising.tables import (
    Moments,
    PairMargin,
    ProbTable,
    SampleCounts,
    empirical_pair,
    independence_table,
    log_likelihood,
    moments_from_counts,
    moments_from_table,
    pair_codes,
    pair_margin,
)

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-10
DEFAULT_MAX_SWEEPS = 10_000
STALL_TOL = 1e-14
LAMBDA_TOL = 1e-12


class Mode(str, Enum):
    """Which family an IPS run fits."""

    MTP2 = "mtp2"
    SYMMETRIC = "symmetric"
    CLASSICAL = "classical"


class IpsState(BaseModel):
    """Iterate of one IPS run."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p: ProbTable
    graph: Graph
    e_plus: tuple[Edge, ...]
    e_hat: frozenset[Edge] = frozenset()
    moments: Moments
    epsilon: float = Field(default=DEFAULT_EPSILON, gt=0)
    mode: Mode = Mode.MTP2
    sweeps: int = 0
    updates: int = 0
    clamps: int = 0


class PreflightResult(NamedTuple):
    ok: bool
    edges: list[Edge]


def _pair_tallies(c: SampleCounts, i: int, j: int) -> np.ndarray:
    return np.bincount(pair_codes(c.dim, i, j), weights=c.counts, minlength=4)


def preflight_existence(c: SampleCounts, g: Graph) -> PreflightResult:
    """
    Check that every edge margin shows both (1,-1) and (-1,1).

    Returns (ok, offending edges), edges 0-indexed.
    """
    bad = []
    for i, j in g.edges:
        tallies = _pair_tallies(c, i, j)
        if tallies[2] == 0 or tallies[1] == 0:
            bad.append((i, j))
    return PreflightResult(ok=not bad, edges=bad)


def preflight_symmetric(c: SampleCounts, g: Graph) -> PreflightResult:
    """Check that every edge shows a disagreement X_i != X_j."""
    bad = []
    for i, j in g.edges:
        tallies = _pair_tallies(c, i, j)
        if tallies[1] + tallies[2] == 0:
            bad.append((i, j))
    return PreflightResult(ok=not bad, edges=bad)


def _one_indexed(edges: list[Edge]) -> list[Edge]:
    return [(i + 1, j + 1) for i, j in edges]


def _log_odds(m: PairMargin) -> float:
    """log[m(1,1) m(-1,-1) / (m(1,-1) m(-1,1))], -inf when the numerator vanishes."""
    if m.pm <= 0 or m.mp <= 0:
        raise SupportError(f"off-diagonal cells must be positive: {m}")
    if m.pp <= 0 or m.mm <= 0:
        return -math.inf
    return math.log(m.pp) + math.log(m.mm) - math.log(m.pm) - math.log(m.mp)


def _delta(p_ij: PairMargin, e: PairMargin) -> float:
    return (_log_odds(e) - _log_odds(p_ij)) / 4


def delta_ij(p: ProbTable, e: PairMargin, i: int, j: int) -> float:
    """
    Quarter log-odds ratio of q = e / p_ij.

    Raises:
        SupportError: If p_ij or e has a zero cell
    """
    p_ij = pair_margin(p, i, j)
    if not p_ij.is_positive():
        raise SupportError(f"pair margin ({i + 1}, {j + 1}) of p has a zero cell")
    if not e.is_positive():
        raise SupportError(f"target margin for ({i + 1}, {j + 1}) has a zero cell")
    return _delta(p_ij, e)


def _lambda_star(p_ij: PairMargin, e: PairMargin, J_ij: float) -> float:
    """Solve Delta(lambda) = -J for the shifted margin (e + x, e - x, e - x, e + x), lambda = 4x."""
    if _delta(p_ij, e) + J_ij > LAMBDA_TOL:
        raise LambdaSolveError(
            f"clamped update needs Delta(0) <= -J, got Delta(0) + J = {_delta(p_ij, e) + J_ij:.3e}"
        )
    upper = min(e.pm, e.mp)
    R = math.exp(_log_odds(p_ij) - 4 * J_ij)
    a = 1 - R
    b = e.pp + e.mm + R * (e.mp + e.pm)
    c = e.pp * e.mm - R * e.mp * e.pm
    if c >= 0:
        # Delta(0) = -J up to rounding; both branches agree
        return 0.0
    if abs(a) < 1e-15:
        candidates = [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            raise LambdaSolveError(f"negative discriminant {disc:.3e}")
        q = -(b + math.copysign(math.sqrt(disc), b)) / 2
        candidates = [c / q, q / a]
    roots = sorted(x for x in candidates if 0 < x < upper)
    if not roots:
        raise LambdaSolveError(
            f"no root of the clamp equation in (0, {upper:.6g}); candidates {candidates}"
        )
    return 4 * roots[0]


def solve_lambda_star(p: ProbTable, e: PairMargin, i: int, j: int, J_ij: float) -> float:
    """
    Shift lambda* > 0 such that fitting e + lambda*/4 (+,-,-,+) zeroes J_ij.

    Raises:
        LambdaSolveError: If Delta(0) > -J_ij or no admissible root exists
    """
    return _lambda_star(pair_margin(p, i, j), e, J_ij)


def _symmetric_target(m_ij: float, lam: float = 0.0) -> PairMargin:
    agree, disagree = (1 + m_ij + lam) / 4, (1 - m_ij - lam) / 4
    return PairMargin(pp=agree, pm=disagree, mp=disagree, mm=agree)


def solve_lambda_symmetric(p: ProbTable, m_ij: float, i: int, j: int, J_ij: float) -> float:
    """
    Closed-form shift for the palindromic family.

    Solves (1/2) log[p(-1,1)(1+M+lambda) / (p(1,1)(1-M-lambda))] = -J.
    """
    return _lambda_symmetric(pair_margin(p, i, j), m_ij, J_ij)


def _lambda_symmetric(p_ij: PairMargin, m_ij: float, J_ij: float) -> float:
    r = p_ij.pp / p_ij.mp * math.exp(-2 * J_ij)
    lam = (r * (1 - m_ij) - (1 + m_ij)) / (1 + r)
    if lam < -LAMBDA_TOL:
        raise LambdaSolveError(f"symmetric clamp gave negative lambda {lam:.3e}")
    lam = max(lam, 0.0)
    if lam >= 1 - m_ij:
        raise LambdaSolveError(f"lambda {lam:.6g} leaves no disagreement mass (M = {m_ij:.6g})")
    return lam


def _rescale(p: ProbTable, i: int, j: int, p_ij: PairMargin, target: PairMargin) -> ProbTable:
    ratio = target.as_codes() / p_ij.as_codes()
    return ProbTable.from_weights(p.dim, p.values * ratio[pair_codes(p.dim, i, j)])


def ips_update(state: IpsState, i: int, j: int) -> IpsState:
    """
    Fit the margin of edge (i, j), clamping the interaction at zero if needed.

    Raises:
        ValueError: If (i, j) is not in E+
        LambdaSolveError: If the clamped branch has no admissible solution
    """
    edge = (min(i, j), max(i, j))
    if edge not in state.e_plus:
        raise ValueError(f"edge ({i + 1}, {j + 1}) is not in E+")
    i, j = edge
    p_ij = pair_margin(state.p, i, j)
    e_hat = set(state.e_hat)
    clamps = state.clamps

    if state.mode == Mode.SYMMETRIC:
        m_ij = float(state.moments.second[i, j])
        target = _symmetric_target(m_ij)
    else:
        target = empirical_pair(state.moments, i, j)

    if state.mode == Mode.CLASSICAL:
        e_hat.add(edge)
    else:
        J = interaction_from_table(state.p, i, j)
        delta = _delta(p_ij, target)
        if delta + J > 0:
            e_hat.add(edge)
        else:
            if state.mode == Mode.SYMMETRIC:
                lam = _lambda_symmetric(p_ij, m_ij, J)
                target = _symmetric_target(m_ij, lam)
            else:
                x = _lambda_star(p_ij, target, J) / 4
                target = PairMargin(
                    pp=target.pp + x, pm=target.pm - x, mp=target.mp - x, mm=target.mm + x
                )
            e_hat.discard(edge)
            clamps += 1

    return state.model_copy(
        update={
            "p": _rescale(state.p, i, j, p_ij, target),
            "e_hat": frozenset(e_hat),
            "updates": state.updates + 1,
            "clamps": clamps,
        }
    )


def initial_state(
    m: Moments,
    g: Graph,
    epsilon: float = DEFAULT_EPSILON,
    mode: Mode = Mode.MTP2,
) -> IpsState:
    """Independence start with mean x-bar (uniform for the symmetric family)."""
    if mode == Mode.SYMMETRIC:
        m = Moments(mean=np.zeros(m.dim), second=m.second)
    p0 = independence_table(m.mean)
    if mode == Mode.CLASSICAL:
        e_plus = g.edges
    else:
        e_plus = tuple(
            (u, v) for u, v in g.edges if m.second[u, v] > m.mean[u] * m.mean[v]
        )
    return IpsState(p=p0, graph=g, e_plus=e_plus, moments=m, epsilon=epsilon, mode=mode)


def _residuals(state: IpsState, fitted: Moments) -> tuple[float, float, float]:
    """(max mean gap, worst dual slack on E, max moment gap on E-hat)."""
    m = state.moments
    mean_gap = float(np.max(np.abs(fitted.mean - m.mean)))
    dual = min(
        (float(fitted.second[u, v] - m.second[u, v]) for u, v in state.graph.edges),
        default=0.0,
    )
    fitted_edges = state.graph.edges if state.mode == Mode.CLASSICAL else state.e_hat
    match = max(
        (abs(float(fitted.second[u, v] - m.second[u, v])) for u, v in fitted_edges),
        default=0.0,
    )
    return mean_gap, dual, match


def _is_converged(state: IpsState, fitted: Moments) -> bool:
    eps = state.epsilon
    mean_gap, dual, match = _residuals(state, fitted)
    if state.mode == Mode.CLASSICAL:
        return mean_gap < eps and match < eps
    return mean_gap < eps and dual >= -eps and match < eps


def run_sweeps(
    state: IpsState,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
    on_update: Callable[[IpsState], None] | None = None,
) -> tuple[IpsState, bool]:
    """Sweep E+ in lexicographic order until the stopping rule holds."""
    previous = state.p.values
    for sweep in range(1, max_sweeps + 1):
        for i, j in state.e_plus:
            state = ips_update(state, i, j)
            if on_update is not None:
                on_update(state)
        if state.mode == Mode.SYMMETRIC:
            p = state.p.values
            state = state.model_copy(
                update={"p": ProbTable.from_weights(state.p.dim, (p + p[::-1]) / 2)}
            )
        state = state.model_copy(update={"sweeps": sweep})

        fitted = moments_from_table(state.p)
        mean_gap, dual, match = _residuals(state, fitted)
        change = float(np.max(np.abs(state.p.values - previous)))
        logger.debug(
            "sweep %d: |E_hat|=%d mean_gap=%.3e dual=%.3e match=%.3e change=%.3e",
            sweep,
            len(state.e_hat),
            mean_gap,
            dual,
            match,
            change,
        )
        if _is_converged(state, fitted):
            return state, True
        if sweep > 1 and change < STALL_TOL:
            logger.debug("sweep %d: table stalled, declaring convergence", sweep)
            return state, True
        previous = state.p.values

    logger.warning("IPS (%s) did not converge within %d sweeps", state.mode.value, max_sweeps)
    return state, False


def _result(state: IpsState, converged: bool, solver: SolverName) -> FitResult:
    fitted = moments_from_table(state.p)
    params, _ = params_from_table(state.p)
    message = None
    if not converged:
        mean_gap, dual, match = _residuals(state, fitted)
        message = (
            f"no convergence after {state.sweeps} sweeps: "
            f"mean gap {mean_gap:.3e}, dual slack {dual:.3e}, edge gap {match:.3e}"
        )
    return FitResult(
        solver=solver,
        table=state.p,
        iterations=state.sweeps,
        converged=converged,
        message=message,
        graph=state.graph,
        fitted_graph=Graph(dim=state.graph.dim, edges=tuple(state.e_hat)),
        params=params,
        moments=fitted,
    )


def _constant_vertices(m: Moments) -> list[int]:
    return [int(v) + 1 for v in np.flatnonzero(np.abs(m.mean) >= 1)]


def _check_vertices(m: Moments) -> None:
    bad = _constant_vertices(m)
    if bad:
        raise ExistenceError(f"constant coordinates {bad}: MLE does not exist", vertices=bad)


def _raise_nonexistent(edges: list[Edge], vertices: list[int], what: str) -> None:
    if not edges and not vertices:
        return
    parts = [f"edges {edges} {what}"] if edges else []
    if vertices:
        parts.append(f"coordinates {vertices} are constant")
    raise ExistenceError("; ".join(parts) + ": MLE does not exist", edges=edges, vertices=vertices)


def require_existence(c: SampleCounts, g: Graph) -> None:
    """
    Raise unless the MTP2 Ising MLE on g exists for the sample.

    Raises:
        ExistenceError: Naming every edge missing (1,-1) or (-1,1) and every
            constant coordinate, 1-indexed
    """
    edges = _one_indexed(preflight_existence(c, g).edges)
    vertices = _constant_vertices(moments_from_counts(c))
    _raise_nonexistent(edges, vertices, "miss (1,-1) or (-1,1)")


def require_symmetric_existence(c: SampleCounts, g: Graph) -> None:
    """Raise ExistenceError naming every edge of g that never shows X_i != X_j."""
    _raise_nonexistent(_one_indexed(preflight_symmetric(c, g).edges), [], "never show X_i != X_j")


def require_classical_existence(c: SampleCounts, g: Graph) -> None:
    """Raise ExistenceError for constant coordinates or edge margins with an empty cell."""
    edges = [(i, j) for i, j in g.edges if np.any(_pair_tallies(c, i, j) == 0)]
    vertices = _constant_vertices(moments_from_counts(c))
    _raise_nonexistent(_one_indexed(edges), vertices, "have an empty margin cell")


def fit_moments(
    m: Moments,
    g: Graph,
    epsilon: float = DEFAULT_EPSILON,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> FitResult:
    """
    MTP2 Ising MLE on g from sufficient statistics (x-bar, M).

    Raises:
        ExistenceError: If a mean is +-1 or an edge misses a sign pattern
    """
    _check_vertices(m)
    bad = []
    for i, j in g.edges:
        e = empirical_pair(m, i, j)
        if e.pm <= 0 or e.mp <= 0:
            bad.append((i, j))
    if bad:
        raise ExistenceError(
            f"edges {_one_indexed(bad)} miss (1,-1) or (-1,1): MLE does not exist",
            edges=_one_indexed(bad),
        )
    state = initial_state(m, g, epsilon)
    logger.debug("IPS start: d=%d |E|=%d |E+|=%d", m.dim, len(g.edges), len(state.e_plus))
    state, converged = run_sweeps(state, max_sweeps)
    return _result(state, converged, SolverName.IPS)


def fit(
    c: SampleCounts,
    g: Graph,
    epsilon: float = DEFAULT_EPSILON,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> FitResult:
    """
    MTP2 Ising MLE of a sample on g.

    Raises:
        ExistenceError: If the preflight fails
    """
    require_existence(c, g)
    result = fit_moments(moments_from_counts(c), g, epsilon, max_sweeps)
    return result.model_copy(update={"log_likelihood": log_likelihood(result.table, c)})


def fit_symmetric(
    c: SampleCounts,
    g: Graph,
    epsilon: float = DEFAULT_EPSILON,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> FitResult:
    """
    Palindromic (h = 0) MTP2 Ising MLE on g.

    Raises:
        ExistenceError: If an edge never shows X_i != X_j
    """
    require_symmetric_existence(c, g)
    state = initial_state(moments_from_counts(c), g, epsilon, mode=Mode.SYMMETRIC)
    state, converged = run_sweeps(state, max_sweeps)
    result = _result(state, converged, SolverName.SYMMETRIC)
    return result.model_copy(update={"log_likelihood": log_likelihood(result.table, c)})


def fit_classical(
    c: SampleCounts,
    g: Graph,
    epsilon: float = DEFAULT_EPSILON,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> FitResult:
    """
    Unconstrained Ising MLE on g by classical IPS.

    Raises:
        ExistenceError: If a mean is +-1 or an edge margin has an empty cell
    """
    require_classical_existence(c, g)
    state = initial_state(moments_from_counts(c), g, epsilon, mode=Mode.CLASSICAL)
    state, converged = run_sweeps(state, max_sweeps)
    result = _result(state, converged, SolverName.CLASSICAL)
    return result.model_copy(update={"log_likelihood": log_likelihood(result.table, c)})


class IpsSolver(BaseSolver):
    """MTP2 Ising MLE on a graph."""

    name = SolverName.IPS
    description = "MTP2 Ising MLE by clamped iterative proportional scaling"

    def __init__(
        self, epsilon: float = DEFAULT_EPSILON, max_sweeps: int = DEFAULT_MAX_SWEEPS
    ) -> None:
        self.epsilon = epsilon
        self.max_sweeps = max_sweeps

    def check(self, counts: SampleCounts, graph: Graph) -> None:
        require_existence(counts, graph)

    def fit(self, counts: SampleCounts, graph: Graph) -> FitResult:
        return fit(counts, graph, self.epsilon, self.max_sweeps)


class SymmetricIpsSolver(IpsSolver):
    """Palindromic MTP2 Ising MLE on a graph."""

    name = SolverName.SYMMETRIC
    description = "Palindromic (h = 0) MTP2 Ising MLE"

    def check(self, counts: SampleCounts, graph: Graph) -> None:
        require_symmetric_existence(counts, graph)

    def fit(self, counts: SampleCounts, graph: Graph) -> FitResult:
        return fit_symmetric(counts, graph, self.epsilon, self.max_sweeps)


class ClassicalIpsSolver(IpsSolver):
    """Unconstrained Ising MLE on a graph."""

    name = SolverName.CLASSICAL
    description = "Ising MLE by classical iterative proportional scaling"

    def check(self, counts: SampleCounts, graph: Graph) -> None:
        require_classical_existence(counts, graph)

    def fit(self, counts: SampleCounts, graph: Graph) -> FitResult:
        return fit_classical(counts, graph, self.epsilon, self.max_sweeps)
