"""
MLE over the unrestricted binary MTP2 family.

The estimate lives on the lattice closure L of the observed states. On L it
maximizes sum_x T(x) theta(x) - log sum_x exp(theta(x)) subject to
supermodularity of theta, solved by a log-barrier Newton method followed by
an active-set polish that makes the tight constraints exact.
"""

import logging
import math
from typing import NamedTuple

import numpy as np
from scipy import linalg
from scipy.optimize import nnls
from scipy.special import logsumexp

from mtp2_ising.certify import LatticeConstraints, cone_membership, lattice_constraints
from mtp2_ising.config import config
from mtp2_ising.errors import ConvergenceError, ExistenceError
from mtp2_ising.ising import Graph
from mtp2_ising.solvers.base import BaseSolver, GeneralFit, SolverName
from mtp2_ising.states import StateSet, algebra_closure, check_dim, lattice_closure
from mtp2_ising.tables import ProbTable, SampleCounts, log_likelihood, pair_codes

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
BARRIER_START = 10.0
BARRIER_GROWTH = 10.0
BARRIER_GAP = 1e-8
CENTRING_TOL = 1e-10
MAX_NEWTON = 200
MAX_ACTIVE_SET_ROUNDS = 100


class GeneralSolution(NamedTuple):
    table: ProbTable
    support: StateSet
    iterations: int
    converged: bool
    active: int


def _softmax(phi: np.ndarray) -> np.ndarray:
    return np.exp(phi - logsumexp(phi))


def _objective(phi: np.ndarray, t_bar: np.ndarray) -> float:
    """Negative mean log-likelihood lse(phi) - T.phi."""
    return float(logsumexp(phi) - t_bar @ phi)


def _newton_solve(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        return linalg.solve(H, -g, assume_a="pos")
    except (linalg.LinAlgError, ValueError):
        return linalg.lstsq(H, -g)[0]


def _centre(
    t_bar: np.ndarray, G: np.ndarray, phi: np.ndarray, t: float
) -> tuple[np.ndarray, int, bool]:
    """
    Damped Newton descent on t * (lse(phi) - T.phi) - sum log(G phi), phi[0] fixed at 0.

    Returns (phi, Newton steps, whether half the squared decrement reached
    CENTRING_TOL).
    """

    def value(x: np.ndarray) -> float:
        return t * _objective(x, t_bar) - float(np.sum(np.log(G @ x)))

    for steps in range(1, MAX_NEWTON + 1):
        s = G @ phi
        p = _softmax(phi)
        grad = t * (p - t_bar) - G.T @ (1 / s)
        H = t * (np.diag(p) - np.outer(p, p)) + (G.T * (1 / s**2)) @ G
        step = np.zeros_like(phi)
        step[1:] = _newton_solve(H[1:, 1:], grad[1:])
        decrement = float(-grad @ step)
        if decrement < 0:
            return phi, steps, False
        if decrement / 2 <= CENTRING_TOL:
            return phi, steps, True

        # steps of local norm below one stay inside the barrier's Dikin ellipsoid
        lam = math.sqrt(decrement)
        alpha = 1.0 if lam <= 0.25 else 1 / (1 + lam)
        f0 = value(phi)
        rounding = 1e-12 * max(1.0, abs(f0))
        trial = phi
        while alpha > 1e-12:
            trial = phi + alpha * step
            if np.all(G @ trial > 0) and value(trial) <= f0 + rounding:
                break
            alpha /= 2
        else:
            return phi, steps, False
        phi = trial
    return phi, MAX_NEWTON, False


def _barrier(t_bar: np.ndarray, G: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, float, int]:
    """
    Path-following barrier method from a strictly feasible phi with phi[0] = 0.

    The path starts at t = BARRIER_START * m, where the centre satisfies
    (p - T).phi = 1 / BARRIER_START, and stops at the first centring that does
    not converge. Returns (phi, final t, Newton steps).
    """
    m = G.shape[0]
    t = BARRIER_START * m
    total = 0
    while True:
        phi, steps, centred = _centre(t_bar, G, phi, t)
        total += steps
        logger.debug("barrier t=%.1e gap=%.3e steps=%d", t, m / t, steps)
        if not centred:
            logger.debug("centring stalled at t=%.1e; handing over to the active-set polish", t)
            return phi, t, total
        if m / t < BARRIER_GAP:
            return phi, t, total
        t *= BARRIER_GROWTH


def _face_newton(
    t_bar: np.ndarray, N: np.ndarray, phi: np.ndarray, tol: float
) -> tuple[np.ndarray, int]:
    """Minimize lse(N z) - T.N z from the projection of phi; returns (N z, steps)."""
    z = N.T @ phi
    for step_count in range(1, MAX_NEWTON + 1):
        x = N @ z
        p = _softmax(x)
        grad = N.T @ (p - t_bar)
        if float(np.max(np.abs(grad), initial=0.0)) < tol:
            return x, step_count
        H = N.T @ (np.diag(p) - np.outer(p, p)) @ N
        step = _newton_solve(H, grad)
        f0, alpha, slope = _objective(x, t_bar), 1.0, float(grad @ step)
        while (
            _objective(N @ (z + alpha * step), t_bar) > f0 + 0.25 * alpha * slope
            and alpha > 1e-16
        ):
            alpha /= 2
        z = z + alpha * step
    return N @ z, MAX_NEWTON


def _polish(
    t_bar: np.ndarray, G: np.ndarray, phi: np.ndarray, t: float, tol: float
) -> tuple[np.ndarray, np.ndarray, int] | None:
    """
    Active-set refinement of a barrier solution.

    Returns (phi, active mask, Newton steps) or None if no consistent active set
    is found.
    """
    s = G @ phi
    active = 1 / (t * s) > s
    steps = 0
    anchor = np.zeros((1, phi.size))
    anchor[0, 0] = 1
    for _ in range(MAX_ACTIVE_SET_ROUNDS):
        N = linalg.null_space(np.vstack([G[active], anchor]))
        if N.shape[1] == 0:
            return None
        candidate, used = _face_newton(t_bar, N, phi, tol * 1e-2)
        steps += used
        p = _softmax(candidate)

        values = G @ candidate
        violated = np.flatnonzero(~active & (values < -tol))
        if violated.size:
            active[violated[np.argmin(values[violated])]] = True
            continue

        rows = np.flatnonzero(active)
        if not rows.size or nnls(G[rows].T, p - t_bar)[1] <= tol:
            return candidate, active, steps
        multipliers = linalg.lstsq(G[rows].T, p - t_bar)[0]
        if multipliers.min() >= -tol:
            return None
        active[rows[np.argmin(multipliers)]] = False
        phi = candidate
    return None


def _solve(c: SampleCounts, tol: float = DEFAULT_TOL) -> GeneralSolution:
    check_dim(c.dim, config.general_max_dim)
    support = lattice_closure(c.support())
    constraints: LatticeConstraints = lattice_constraints(support)
    masks = constraints.support
    t_bar = c.counts[masks] / c.n
    logger.debug("general MLE: |L|=%d constraints=%d", masks.size, len(constraints))

    def table(values: np.ndarray) -> ProbTable:
        full = np.zeros(1 << c.dim)
        full[masks] = values
        return ProbTable.from_weights(c.dim, full)

    if masks.size == 1 or len(constraints) == 0:
        # a chain: every state of L is observed and T-bar is feasible
        return GeneralSolution(table(t_bar), support, 0, True, 0)

    G = constraints.matrix()
    sizes = np.array([bin(int(m)).count("1") for m in masks], dtype=np.float64)
    # strictly supermodular on any lattice, scaled to stay close to uniform
    phi0 = (sizes**2 - sizes[0] ** 2) / max(1.0, float(sizes.max()) ** 2)
    phi, t, steps = _barrier(t_bar, G, phi0)

    polished = _polish(t_bar, G, phi, t, tol)
    if polished is not None:
        candidate, active, more = polished
        steps += more
        p = _softmax(candidate)
        primal = float((G @ candidate).min())
        residual = cone_membership(p - t_bar, G).residual
        if primal >= -1e-9 and residual <= 1e-9:
            return GeneralSolution(table(p), support, steps, True, int(active.sum()))
        logger.debug("polish rejected: primal=%.3e residual=%.3e", primal, residual)

    s = G @ phi
    active_count = int(np.sum(1 / (t * s) > s))
    logger.warning("general MLE: active-set polish failed, returning barrier solution")
    return GeneralSolution(table(_softmax(phi)), support, steps, False, active_count)


def solve_general(c: SampleCounts, tol: float = DEFAULT_TOL) -> ProbTable:
    """
    Binary MTP2 MLE of a sample, supported on the lattice closure of its states.

    Raises:
        DimensionError: If d exceeds the general-solver cap
        ConvergenceError: If no active set passes the optimality check
    """
    solution = _solve(c, tol)
    if not solution.converged:
        raise ConvergenceError(
            f"general MLE did not converge after {solution.iterations} Newton steps"
        )
    return solution.table


def _pairwise_patterns(c: SampleCounts) -> list[tuple[int, int]]:
    missing = []
    for i in range(c.dim):
        for j in range(i + 1, c.dim):
            tallies = np.bincount(pair_codes(c.dim, i, j), weights=c.counts, minlength=4)
            if tallies[2] == 0 or tallies[1] == 0:
                missing.append((i, j))
    return missing


def mle_exists_general(c: SampleCounts) -> bool:
    """
    Whether the MTP2 MLE has full support.

    Holds iff every pair margin shows (1,-1) and (-1,1), equivalently iff the
    lattice closure of the observed states is the whole cube.
    """
    if c.dim == 1:
        return bool(np.all(c.counts > 0))
    pairwise = not _pairwise_patterns(c)
    closure = lattice_closure(c.support()).is_full()
    if pairwise != closure:
        logger.error("existence criteria disagree: pairwise=%s closure=%s", pairwise, closure)
    return closure


def mle_exists_symmetric(c: SampleCounts) -> bool:
    """Whether every pair disagrees somewhere, equivalently the algebra closure is the cube."""
    pairwise = True
    for i in range(c.dim):
        for j in range(i + 1, c.dim):
            tallies = np.bincount(pair_codes(c.dim, i, j), weights=c.counts, minlength=4)
            if tallies[1] + tallies[2] == 0:
                pairwise = False
    closure = algebra_closure(c.support()).is_full()
    if pairwise != closure:
        logger.error("existence criteria disagree: pairwise=%s closure=%s", pairwise, closure)
    return closure


def missing_patterns(c: SampleCounts) -> list[tuple[int, int]]:
    """Pairs (1-indexed) lacking (1,-1) or (-1,1)."""
    return [(i + 1, j + 1) for i, j in _pairwise_patterns(c)]


class GeneralSolver(BaseSolver):
    """Unrestricted binary MTP2 MLE."""

    name = SolverName.GENERAL
    description = "Binary MTP2 MLE over all supermodular log-densities"

    def __init__(self, tol: float = DEFAULT_TOL) -> None:
        self.tol = tol

    def check(self, counts: SampleCounts, graph: Graph | None = None) -> None:
        """The MLE always exists; raise only if it lacks full support."""
        if mle_exists_general(counts):
            return
        if counts.dim == 1:
            raise ExistenceError("coordinate 1 is constant", vertices=[1])
        edges = missing_patterns(counts)
        raise ExistenceError(
            f"pairs {edges} miss (1,-1) or (-1,1): MLE is supported on a proper sublattice",
            edges=edges,
        )

    def fit(self, counts: SampleCounts, graph: Graph | None = None) -> GeneralFit:
        solution = _solve(counts, self.tol)
        message = None if solution.converged else "active-set polish failed; barrier solution"
        return GeneralFit(
            solver=self.name,
            table=solution.table,
            iterations=solution.iterations,
            converged=solution.converged,
            log_likelihood=log_likelihood(solution.table, counts),
            message=message,
            support=solution.support,
            active_constraints=solution.active,
        )
