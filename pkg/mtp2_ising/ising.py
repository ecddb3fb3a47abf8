"""Ising parametrization p(x) = exp(h'x + x'Jx/2 - A(h, J)) and conversions."""

from itertools import combinations
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.special import logsumexp

from mtp2_ising.errors import DimensionError, SupportError
from mtp2_ising.states import check_dim
from mtp2_ising.tables import ProbTable, sign_matrix

ISING_TOL = 1e-7
PARAM_TOL = 1e-12

Edge = tuple[int, int]


class Graph(BaseModel):
    """Undirected simple graph on vertices 0..d-1; edges stored as sorted (i, j), i < j."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1)
    edges: tuple[Edge, ...] = ()

    @field_validator("edges", mode="before")
    @classmethod
    def _normalize_edges(cls, v: Any) -> tuple[Edge, ...]:
        normalized = set()
        for edge in v:
            i, j = (int(k) for k in edge)
            if i == j:
                raise ValueError(f"self-loop at vertex {i + 1}")
            normalized.add((min(i, j), max(i, j)))
        return tuple(sorted(normalized))

    @model_validator(mode="after")
    def _check_range(self) -> "Graph":
        for i, j in self.edges:
            if i < 0 or j >= self.dim:
                raise ValueError(f"edge ({i + 1}, {j + 1}) out of range 1..{self.dim}")
        return self

    @classmethod
    def complete(cls, dim: int) -> "Graph":
        return cls(dim=dim, edges=tuple(combinations(range(dim), 2)))

    @classmethod
    def cycle(cls, dim: int) -> "Graph":
        return cls(dim=dim, edges=tuple((k, (k + 1) % dim) for k in range(dim)))

    @classmethod
    def chain(cls, dim: int) -> "Graph":
        return cls(dim=dim, edges=tuple((k, k + 1) for k in range(dim - 1)))

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in set(self.edges)

    def one_indexed(self) -> list[Edge]:
        return [(i + 1, j + 1) for i, j in self.edges]


class IsingParams(BaseModel):
    """Canonical parameters: external field h and symmetric zero-diagonal J."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    h: np.ndarray
    J: np.ndarray

    @field_validator("h", "J", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.float64, copy=True)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def _check_shape(self) -> "IsingParams":
        d = self.h.shape[0]
        if self.h.ndim != 1 or self.J.shape != (d, d):
            raise ValueError("h must be (d,) and J (d, d)")
        if not np.allclose(self.J, self.J.T, atol=PARAM_TOL):
            raise ValueError("J must be symmetric")
        if np.any(np.abs(np.diag(self.J)) > PARAM_TOL):
            raise ValueError("J must have zero diagonal")
        return self

    @classmethod
    def zeros(cls, dim: int) -> "IsingParams":
        return cls(h=np.zeros(dim), J=np.zeros((dim, dim)))

    @property
    def dim(self) -> int:
        return int(self.h.shape[0])

    def support_graph(self, tol: float = PARAM_TOL) -> Graph:
        """Graph G(J) of nonzero interactions."""
        d = self.dim
        edges = [(i, j) for i, j in combinations(range(d), 2) if abs(self.J[i, j]) > tol]
        return Graph(dim=d, edges=edges)


def energies(theta: IsingParams) -> np.ndarray:
    """h'x + x'Jx/2 for every state."""
    signs = sign_matrix(theta.dim).astype(np.float64)
    return signs @ theta.h + 0.5 * np.sum((signs @ theta.J) * signs, axis=1)


def log_normalizer(theta: IsingParams) -> float:
    """A(h, J) by log-sum-exp over all 2^d states."""
    return float(logsumexp(energies(theta)))


def table_from_params(theta: IsingParams) -> ProbTable:
    """Normalized Ising table."""
    check_dim(theta.dim)
    e = energies(theta)
    log_p = e - logsumexp(e)
    return ProbTable.from_weights(theta.dim, np.exp(log_p))


def _positive(p: ProbTable, masks: list[int]) -> np.ndarray:
    vals = p.values[masks]
    if np.any(vals <= 0):
        raise SupportError(f"zero probability among states {masks}")
    return vals


def interaction_from_table(p: ProbTable, i: int, j: int, context: int = 0) -> float:
    """
    J_ij as a quarter conditional log-odds ratio.

    `context` is the mask A of coordinates fixed at +1 (bits i, j must be clear);
    the default A = all -1.
    """
    bi, bj = 1 << i, 1 << j
    if i == j or not (0 <= i < p.dim and 0 <= j < p.dim):
        raise DimensionError(f"invalid coordinate pair ({i}, {j}) for d={p.dim}")
    if context & (bi | bj):
        raise ValueError("context must not fix coordinates i or j")
    low, with_i, with_j, top = _positive(
        p, [context, context | bi, context | bj, context | bi | bj]
    )
    return float(np.log(top * low / (with_i * with_j)) / 4)


def field_from_table(p: ProbTable, i: int) -> float:
    """h_i from x = all +1, y = x with coordinate i flipped, and their negations."""
    if not 0 <= i < p.dim:
        raise DimensionError(f"invalid coordinate {i} for d={p.dim}")
    top = (1 << p.dim) - 1
    x, y = top, top ^ (1 << i)
    neg_x, neg_y = 0, 1 << i
    px, py, pnx, pny = _positive(p, [x, y, neg_x, neg_y])
    return float(np.log(px * pny / (pnx * py)) / 4)


def params_from_table(p: ProbTable, tol: float = ISING_TOL) -> tuple[IsingParams, bool]:
    """
    Extract (h, J) with the reference contexts and test Ising-family membership.

    Returns (params, is_ising); is_ising holds when the table rebuilt from the
    extracted parameters matches p to `tol` in max-norm.
    """
    if not p.has_full_support():
        raise SupportError("parameter extraction needs a full-support table")
    d = p.dim
    log_p = np.log(p.values)
    J = np.zeros((d, d))
    for i, j in combinations(range(d), 2):
        bi, bj = 1 << i, 1 << j
        J[i, j] = J[j, i] = (log_p[bi | bj] + log_p[0] - log_p[bi] - log_p[bj]) / 4
    h = np.array([field_from_table(p, i) for i in range(d)])
    theta = IsingParams(h=h, J=J)
    rebuilt = table_from_params(theta)
    return theta, bool(np.max(np.abs(rebuilt.values - p.values)) <= tol)


def is_mtp2_params(theta: IsingParams, tol: float = PARAM_TOL) -> bool:
    """An Ising model is MTP2 iff every off-diagonal J_ij >= 0."""
    if theta.dim < 2:
        return True
    off = theta.J[~np.eye(theta.dim, dtype=bool)]
    return bool(off.min() >= -tol)


def is_inverse_m_matrix(sigma: Any, tol: float = 1e-9) -> bool:
    """Whether sigma is invertible with an inverse whose off-diagonal is <= tol."""
    sigma = np.asarray(sigma, dtype=np.float64)
    try:
        inv = np.linalg.inv(sigma)
    except np.linalg.LinAlgError:
        return False
    off = inv[~np.eye(sigma.shape[0], dtype=bool)]
    return bool(off.size == 0 or off.max() <= tol)
