"""Dense probability tables, sample counts, moments and MTP2 checks."""

from functools import lru_cache
from typing import Any, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mtp2_ising.errors import DimensionError, InconsistentMomentsError, SupportError
from mtp2_ising.states import (
    StateSet,
    check_dim,
    elementary_index,
    is_lattice,
)

SUM_TOL = 1e-12
MTP2_TOL = 1e-9

_ARRAY_MODEL = ConfigDict(frozen=True, arbitrary_types_allowed=True)


@lru_cache(maxsize=8)
def sign_matrix(dim: int) -> np.ndarray:
    """Read-only (2^d, d) int8 matrix; row s holds the +-1 coordinates of mask s."""
    check_dim(dim)
    idx = np.arange(1 << dim, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(dim)) & 1
    signs = (2 * bits - 1).astype(np.int8)
    signs.setflags(write=False)
    return signs


@lru_cache(maxsize=512)
def pair_codes(dim: int, i: int, j: int) -> np.ndarray:
    """Per-state code 2*[x_i=+1] + [x_j=+1]; 3=(1,1), 2=(1,-1), 1=(-1,1), 0=(-1,-1)."""
    idx = np.arange(1 << dim, dtype=np.int64)
    codes = (2 * ((idx >> i) & 1) + ((idx >> j) & 1)).astype(np.int8)
    codes.setflags(write=False)
    return codes


def lattice_order(dim: int) -> list[int]:
    """Masks sorted by number of +1 coordinates, then by their sorted subset."""
    def key(mask: int) -> tuple[int, list[int]]:
        subset = [k for k in range(dim) if mask >> k & 1]
        return len(subset), subset

    return sorted(range(1 << dim), key=key)


def _frozen_array(values: Any, dtype: Any) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class ProbTable(BaseModel):
    """A distribution p on {-1,1}^d, indexed by state mask."""

    model_config = _ARRAY_MODEL

    dim: int = Field(ge=1)
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _frozen_array(v, np.float64)

    @model_validator(mode="after")
    def _check_distribution(self) -> "ProbTable":
        if self.values.shape != (1 << self.dim,):
            raise ValueError(f"table for d={self.dim} needs {1 << self.dim} values")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("table values must be finite and nonnegative")
        total = float(self.values.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"table sums to {total!r}, not 1")
        return self

    @classmethod
    def from_weights(cls, dim: int, weights: Any) -> "ProbTable":
        """Normalize nonnegative weights into a table."""
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if not total > 0:
            raise SupportError("weights have no positive mass")
        return cls(dim=dim, values=w / total)

    @classmethod
    def uniform(cls, dim: int) -> "ProbTable":
        return cls(dim=dim, values=np.full(1 << dim, 1.0 / (1 << dim)))

    def support(self) -> StateSet:
        members = frozenset(int(s) for s in np.flatnonzero(self.values > 0))
        return StateSet(dim=self.dim, members=members)

    def has_full_support(self) -> bool:
        return bool(np.all(self.values > 0))


class SampleCounts(BaseModel):
    """Counts n(x) of observed states."""

    model_config = _ARRAY_MODEL

    dim: int = Field(ge=1)
    counts: np.ndarray

    @field_validator("counts", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        arr = np.asarray(v)
        if arr.dtype.kind == "f" and not np.all(arr == np.round(arr)):
            raise ValueError("counts must be integers")
        return _frozen_array(arr, np.int64)

    @model_validator(mode="after")
    def _check_counts(self) -> "SampleCounts":
        if self.counts.shape != (1 << self.dim,):
            raise ValueError(f"counts for d={self.dim} need {1 << self.dim} entries")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")
        if self.n < 1:
            raise ValueError("sample has no observations")
        return self

    @classmethod
    def from_masks(cls, dim: int, masks: Any) -> "SampleCounts":
        """Tally a sequence of observed state masks."""
        check_dim(dim)
        masks = np.asarray(masks, dtype=np.int64)
        return cls(dim=dim, counts=np.bincount(masks, minlength=1 << dim))

    @classmethod
    def from_rows(cls, rows: Any) -> "SampleCounts":
        """Tally an (n, d) array of +-1 observations."""
        x = np.asarray(rows, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError("rows must be a nonempty (n, d) array")
        if not np.all(np.abs(x) == 1):
            raise ValueError("rows must contain only -1 and 1")
        masks = ((x > 0).astype(np.int64) << np.arange(x.shape[1])).sum(axis=1)
        return cls.from_masks(x.shape[1], masks)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def empirical(self) -> ProbTable:
        """T-bar = counts / n."""
        return ProbTable(dim=self.dim, values=self.counts / self.n)

    def support(self) -> StateSet:
        members = frozenset(int(s) for s in np.flatnonzero(self.counts))
        return StateSet(dim=self.dim, members=members)


class Moments(BaseModel):
    """First and second moments (mean, E[X X^T]) with unit diagonal."""

    model_config = _ARRAY_MODEL

    mean: np.ndarray
    second: np.ndarray

    @field_validator("mean", "second", mode="before")
    @classmethod
    def _as_array(cls, v: Any) -> np.ndarray:
        return _frozen_array(v, np.float64)

    @model_validator(mode="after")
    def _check_moments(self) -> "Moments":
        d = self.mean.shape[0]
        if self.mean.ndim != 1 or self.second.shape != (d, d):
            raise ValueError("mean must be (d,) and second (d, d)")
        if not np.allclose(self.second, self.second.T, atol=1e-12):
            raise ValueError("second-moment matrix must be symmetric")
        if np.any(np.abs(self.second) > 1 + 1e-12) or np.any(np.abs(self.mean) > 1 + 1e-12):
            raise ValueError("moments of +-1 variables lie in [-1, 1]")
        return self

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def covariance(self) -> np.ndarray:
        """S = M - mean mean^T."""
        return self.second - np.outer(self.mean, self.mean)


class PairMargin(NamedTuple):
    """A (possibly unnormalized) function on {-1,1}^2, e.g. e_ij, p_ij, q_ij."""

    pp: float
    pm: float
    mp: float
    mm: float

    def as_codes(self) -> np.ndarray:
        """Values indexed by `pair_codes` (0=(-1,-1), 1=(-1,1), 2=(1,-1), 3=(1,1))."""
        return np.array([self.mm, self.mp, self.pm, self.pp])

    @property
    def second_moment(self) -> float:
        return self.pp + self.mm - self.pm - self.mp

    def is_positive(self) -> bool:
        return min(self) > 0


def moments_from_counts(c: SampleCounts) -> Moments:
    """Sample mean x-bar and M = (1/n) sum x x^T."""
    signs = sign_matrix(c.dim).astype(np.float64)
    w = c.counts / c.n
    mean = signs.T @ w
    second = (signs * w[:, None]).T @ signs
    np.fill_diagonal(second, 1.0)
    return Moments(mean=np.clip(mean, -1, 1), second=np.clip(second, -1, 1))


def moments_from_table(p: ProbTable) -> Moments:
    """Model-side mean parameters (mu, Xi) of a table."""
    signs = sign_matrix(p.dim).astype(np.float64)
    mean = signs.T @ p.values
    second = (signs * p.values[:, None]).T @ signs
    second = (second + second.T) / 2
    np.fill_diagonal(second, 1.0)
    return Moments(mean=np.clip(mean, -1, 1), second=np.clip(second, -1, 1))


def _check_pair(dim: int, i: int, j: int) -> None:
    if i == j or not (0 <= i < dim and 0 <= j < dim):
        raise DimensionError(f"invalid coordinate pair ({i}, {j}) for d={dim}")


def pair_margin(p: ProbTable, i: int, j: int) -> PairMargin:
    """Marginal distribution of (X_i, X_j)."""
    _check_pair(p.dim, i, j)
    q = np.bincount(pair_codes(p.dim, i, j), weights=p.values, minlength=4)
    return PairMargin(pp=float(q[3]), pm=float(q[2]), mp=float(q[1]), mm=float(q[0]))


def empirical_pair(m: Moments, i: int, j: int) -> PairMargin:
    """Closed-form pair distribution e_ij from (x-bar, M)."""
    _check_pair(m.dim, i, j)
    xi, xj, mij = m.mean[i], m.mean[j], m.second[i, j]
    entries = [
        (1 + xi + xj + mij) / 4,
        (1 + xi - xj - mij) / 4,
        (1 - xi + xj - mij) / 4,
        (1 - xi - xj + mij) / 4,
    ]
    if min(entries) < -SUM_TOL:
        raise InconsistentMomentsError(
            f"moments give a negative probability for pair ({i + 1}, {j + 1}): {entries}"
        )
    pp, pm, mp, mm = (max(e, 0.0) for e in entries)
    return PairMargin(pp=pp, pm=pm, mp=mp, mm=mm)


class Mtp2Check(NamedTuple):
    """Result of an MTP2 check; violations are (x, y) mask pairs."""

    ok: bool
    violations: list[tuple[int, int]]
    worst: float


def is_mtp2(p: ProbTable, tol: float = MTP2_TOL) -> Mtp2Check:
    """
    Check p(x^y) p(xvy) >= p(x) p(y) - tol.

    With full support the elementary pairs suffice; otherwise every pair of
    support states is checked.
    """
    v = p.values
    if p.dim < 2:
        return Mtp2Check(ok=True, violations=[], worst=0.0)

    if p.has_full_support():
        idx = elementary_index(p.dim)
        gap = v[idx.top] * v[idx.bottom] - v[idx.with_i] * v[idx.with_j]
        bad = np.flatnonzero(gap < -tol)
        violations = [(int(idx.with_i[k]), int(idx.with_j[k])) for k in bad]
        return Mtp2Check(ok=bad.size == 0, violations=violations, worst=float(gap.min()))

    # pairs with a zero factor on the right are satisfied trivially
    support = np.flatnonzero(v > 0)
    violations = []
    worst = 0.0
    for start in range(0, support.size, 1024):
        x = support[start : start + 1024, None]
        y = support[None, :]
        gap = v[x & y] * v[x | y] - v[x] * v[y]
        worst = min(worst, float(gap.min()))
        for a, b in zip(*np.nonzero(gap < -tol)):
            xm, ym = int(x[a, 0]), int(y[0, b])
            if xm < ym:
                violations.append((xm, ym))
    return Mtp2Check(ok=not violations, violations=violations, worst=worst)


def support_is_lattice(p: ProbTable) -> bool:
    """Whether supp(p) is closed under meet and join."""
    return is_lattice(p.support())


def pair_support_full(p: ProbTable) -> bool:
    """Whether every pair margin puts positive mass on all four cells."""
    for i in range(p.dim):
        for j in range(i + 1, p.dim):
            if not pair_margin(p, i, j).is_positive():
                return False
    return True


def log_likelihood(p: ProbTable, c: SampleCounts) -> float:
    """sum_x n(x) log p(x); -inf if a observed state has probability 0."""
    if p.dim != c.dim:
        raise DimensionError(f"table d={p.dim} vs sample d={c.dim}")
    observed = c.counts > 0
    if np.any(p.values[observed] <= 0):
        return float("-inf")
    return float(np.sum(c.counts[observed] * np.log(p.values[observed])))


def symmetrize(c: SampleCounts) -> SampleCounts:
    """n^s(x) = n(x) + n(-x); -x has the complementary mask, i.e. the reversed index."""
    return SampleCounts(dim=c.dim, counts=c.counts + c.counts[::-1])


def independence_table(mu: Any) -> ProbTable:
    """Product distribution with means mu: p(x) = 2^-d prod_v (1 + x_v mu_v)."""
    mu = np.asarray(mu, dtype=np.float64)
    if mu.ndim != 1 or mu.size == 0:
        raise DimensionError("mu must be a nonempty vector")
    if np.any(np.abs(mu) >= 1):
        bad = [int(v) + 1 for v in np.flatnonzero(np.abs(mu) >= 1)]
        raise SupportError(f"means must lie strictly inside (-1, 1); vertices {bad}")
    signs = sign_matrix(mu.size)
    values = np.prod((1 + signs * mu) / 2, axis=1)
    return ProbTable.from_weights(mu.size, values)


def marginal_table(p: ProbTable, keep: list[int]) -> ProbTable:
    """Margin of p on the coordinates `keep` (0-indexed), re-encoded in that order."""
    if not keep or len(set(keep)) != len(keep) or not all(0 <= k < p.dim for k in keep):
        raise DimensionError(f"invalid margin {keep} for d={p.dim}")
    idx = np.arange(1 << p.dim, dtype=np.int64)
    new = np.zeros_like(idx)
    for pos, k in enumerate(keep):
        new |= ((idx >> k) & 1) << pos
    weights = np.bincount(new, weights=p.values, minlength=1 << len(keep))
    return ProbTable.from_weights(len(keep), weights)


def conditional_table(p: ProbTable, fixed: dict[int, int]) -> ProbTable:
    """Conditional of the free coordinates given X_k = fixed[k] (0-indexed, +-1)."""
    free = [k for k in range(p.dim) if k not in fixed]
    if not free or any(not 0 <= k < p.dim or s not in (-1, 1) for k, s in fixed.items()):
        raise DimensionError(f"invalid conditioning {fixed} for d={p.dim}")
    idx = np.arange(1 << p.dim, dtype=np.int64)
    match = np.ones(idx.size, dtype=bool)
    for k, s in fixed.items():
        match &= ((idx >> k) & 1) == (1 if s == 1 else 0)
    mass = p.values[match].sum()
    if not mass > 0:
        raise SupportError(f"conditioning event {fixed} has probability 0")
    restricted = np.where(match, p.values, 0.0)
    return marginal_table(ProbTable(dim=p.dim, values=restricted / mass), free)
