"""
State space {-1,1}^d as a Boolean lattice of bitmasks.

Bit i of a mask is set iff coordinate i (0-indexed) equals +1, so meet and join
are bitwise AND and OR, and the state corresponds to the subset {i : x_i = +1}.
User-facing I/O is 1-indexed; everything in this module is 0-indexed.
"""

from collections.abc import Iterable, Iterator, Sequence
from itertools import combinations
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from mtp2_ising.config import config
from mtp2_ising.errors import DimensionError


def check_dim(dim: int, cap: int | None = None) -> None:
    """Raise DimensionError unless 1 <= dim <= cap (default: configured max_dim)."""
    cap = config.max_dim if cap is None else cap
    if dim < 1:
        raise DimensionError(f"Dimension must be at least 1, got {dim}")
    if dim > cap:
        raise DimensionError(
            f"Dimension {dim} exceeds the dense-table cap of {cap} "
            f"(2^{dim} states); raise MTP2_MAX_DIM to override"
        )


class State(BaseModel):
    """A point of {-1,1}^d encoded as a d-bit mask."""

    model_config = ConfigDict(frozen=True)

    bits: int = Field(ge=0)
    dim: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_bits(self) -> "State":
        if self.bits >= 1 << self.dim:
            raise ValueError(f"bits {self.bits} out of range for dim {self.dim}")
        return self

    @classmethod
    def from_signs(cls, signs: Sequence[int]) -> "State":
        """Build a state from a +-1 vector."""
        bits = 0
        for i, s in enumerate(signs):
            if s not in (-1, 1):
                raise ValueError(f"Coordinate {i + 1} must be -1 or 1, got {s}")
            if s == 1:
                bits |= 1 << i
        return cls(bits=bits, dim=len(signs))

    @classmethod
    def from_subset(cls, subset: Iterable[int], dim: int) -> "State":
        """Build a state from a 1-indexed subset {i : x_i = +1}."""
        bits = 0
        for i in subset:
            if not 1 <= i <= dim:
                raise ValueError(f"Vertex {i} out of range 1..{dim}")
            bits |= 1 << (i - 1)
        return cls(bits=bits, dim=dim)

    @property
    def signs(self) -> tuple[int, ...]:
        return tuple(1 if self.bits >> i & 1 else -1 for i in range(self.dim))

    @property
    def subset(self) -> frozenset[int]:
        """1-indexed coordinates equal to +1."""
        return frozenset(i + 1 for i in range(self.dim) if self.bits >> i & 1)

    def complement(self) -> "State":
        """The state -x."""
        return State(bits=self.bits ^ full_mask(self.dim), dim=self.dim)


class StateSet(BaseModel):
    """A set of states sharing one dimension, stored as masks."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1)
    members: frozenset[int]

    @model_validator(mode="after")
    def _check_members(self) -> "StateSet":
        top = 1 << self.dim
        bad = [m for m in self.members if not 0 <= m < top]
        if bad:
            raise ValueError(f"masks {sorted(bad)[:5]} out of range for dim {self.dim}")
        return self

    @classmethod
    def of(cls, states: Iterable[State]) -> "StateSet":
        states = list(states)
        if not states:
            raise ValueError("Cannot infer dimension of an empty state list")
        dim = states[0].dim
        if any(s.dim != dim for s in states):
            raise DimensionError("All states must share one dimension")
        return cls(dim=dim, members=frozenset(s.bits for s in states))

    @classmethod
    def full(cls, dim: int) -> "StateSet":
        return cls(dim=dim, members=frozenset(range(1 << dim)))

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, item: object) -> bool:
        if isinstance(item, State):
            return item.dim == self.dim and item.bits in self.members
        return item in self.members

    def states(self) -> Iterator[State]:
        for bits in sorted(self.members):
            yield State(bits=bits, dim=self.dim)

    def is_full(self) -> bool:
        return len(self.members) == 1 << self.dim

    def as_mask_array(self) -> np.ndarray:
        return np.fromiter(sorted(self.members), dtype=np.int64, count=len(self.members))


def full_mask(dim: int) -> int:
    return (1 << dim) - 1


def _same_dim(a: State, b: State) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"Dimension mismatch: {a.dim} vs {b.dim}")


def meet(a: State, b: State) -> State:
    """Coordinatewise minimum x ^ y."""
    _same_dim(a, b)
    return State(bits=a.bits & b.bits, dim=a.dim)


def join(a: State, b: State) -> State:
    """Coordinatewise maximum x v y."""
    _same_dim(a, b)
    return State(bits=a.bits | b.bits, dim=a.dim)


def _join_closure(generators: np.ndarray, size: int) -> np.ndarray:
    """
    Membership vector of all joins of nonempty subsets of generators.

    x is such a join iff the join of the generators below x is x itself. That
    join is a subset-OR transform, built one coordinate at a time.
    """
    below = np.zeros(size, dtype=np.int64)
    seen = np.zeros(size, dtype=bool)
    below[generators] = generators
    seen[generators] = True
    everything = np.arange(size, dtype=np.int64)
    bit = 1
    while bit < size:
        upper = everything[(everything & bit) != 0]
        below[upper] |= below[upper ^ bit]
        seen[upper] |= seen[upper ^ bit]
        bit <<= 1
    return seen & (below == everything)


def _meet_closure(generators: np.ndarray, size: int) -> np.ndarray:
    # meets of U are the complements of joins of complements
    return _join_closure((size - 1) ^ generators, size)[::-1].copy()


def _lattice_closure_masks(dim: int, masks: Iterable[int]) -> np.ndarray:
    """Boolean membership vector of the sublattice generated by `masks`."""
    size = 1 << dim
    gens = np.unique(np.fromiter(masks, dtype=np.int64))
    # In a distributive lattice the generated sublattice is the join-closure of the
    # meet-closure of the generators.
    meets = _meet_closure(gens, size)
    return _join_closure(np.flatnonzero(meets), size)


def lattice_closure(u: StateSet) -> StateSet:
    """Smallest subset of {-1,1}^d containing u and closed under meet and join."""
    if not u.members:
        raise ValueError("lattice_closure needs a nonempty state set")
    check_dim(u.dim)
    present = _lattice_closure_masks(u.dim, u.members)
    return StateSet(dim=u.dim, members=frozenset(int(m) for m in np.flatnonzero(present)))


def algebra_closure(u: StateSet) -> StateSet:
    """Smallest superset of u closed under meet, join and x -> -x."""
    if not u.members:
        raise ValueError("algebra_closure needs a nonempty state set")
    # Complementation swaps meet and join, so the lattice generated by U and -U
    # is already closed under it.
    flip = full_mask(u.dim)
    both = set(u.members) | {m ^ flip for m in u.members}
    return lattice_closure(StateSet(dim=u.dim, members=frozenset(both)))


def is_lattice(u: StateSet) -> bool:
    """Whether u is closed under meet and join."""
    if not u.members or u.is_full():
        return True
    masks = u.as_mask_array()
    present = np.zeros(1 << u.dim, dtype=bool)
    present[masks] = True
    for start in range(0, masks.size, 1024):
        block = masks[start : start + 1024, None]
        if not (present[block & masks].all() and present[block | masks].all()):
            return False
    return True


class ElementaryPair(NamedTuple):
    """States A+{i} and A+{j}; their meet is A and their join A+{i,j}."""

    x: State
    y: State
    i: int
    j: int
    context: frozenset[int]


class ElementaryIndex(NamedTuple):
    """Vectorized masks of all elementary pairs: bottom A, A+i, A+j, top A+ij."""

    i: np.ndarray
    j: np.ndarray
    bottom: np.ndarray
    with_i: np.ndarray
    with_j: np.ndarray
    top: np.ndarray


def elementary_index(dim: int) -> ElementaryIndex:
    """Mask arrays for every elementary pair, ordered by (i, j) then context mask."""
    if dim < 2:
        raise DimensionError("Elementary pairs need d >= 2")
    everything = np.arange(1 << dim, dtype=np.int64)
    cols: list[list[np.ndarray]] = [[], [], [], [], [], []]
    for i, j in combinations(range(dim), 2):
        bi, bj = 1 << i, 1 << j
        contexts = everything[(everything & (bi | bj)) == 0]
        cols[0].append(np.full(contexts.size, i))
        cols[1].append(np.full(contexts.size, j))
        cols[2].append(contexts)
        cols[3].append(contexts | bi)
        cols[4].append(contexts | bj)
        cols[5].append(contexts | bi | bj)
    return ElementaryIndex(*(np.concatenate(c) for c in cols))


def elementary_pairs(d: int) -> list[ElementaryPair]:
    """All unordered pairs {A+i, A+j}, i < j, A a subset of V minus {i, j}."""
    idx = elementary_index(d)
    pairs = []
    for i, j, a, ai, aj in zip(idx.i, idx.j, idx.bottom, idx.with_i, idx.with_j):
        pairs.append(
            ElementaryPair(
                x=State(bits=int(ai), dim=d),
                y=State(bits=int(aj), dim=d),
                i=int(i),
                j=int(j),
                context=frozenset(k for k in range(d) if int(a) >> k & 1),
            )
        )
    return pairs


def elementary_pair_count(d: int) -> int:
    return d * (d - 1) // 2 * (1 << (d - 2)) if d >= 2 else 0
