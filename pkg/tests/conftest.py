"""Shared fixtures: worked examples and random model generators."""

from itertools import combinations

import numpy as np
import pytest

from mtp2_ising.ising import Graph, IsingParams, table_from_params
from mtp2_ising.tables import ProbTable, SampleCounts

# Eight states on a 4-cycle whose MTP2 MLE is a symmetric Markov chain.
MOUSSOURIS_ROWS = [
    (-1, -1, -1, -1),
    (1, -1, -1, -1),
    (1, 1, -1, -1),
    (1, 1, 1, -1),
    (-1, -1, -1, 1),
    (-1, -1, 1, 1),
    (-1, 1, 1, 1),
    (1, 1, 1, 1),
]

# MLE in graded lattice order, times 128
MOUSSOURIS_MLE_128 = [27, 9, 3, 3, 9, 9, 1, 3, 3, 1, 9, 9, 3, 3, 9, 27]

MOUSSOURIS_SIGMA = [
    [1, 0.5, 0.25, 0.125],
    [0.5, 1, 0.5, 0.25],
    [0.25, 0.5, 1, 0.5],
    [0.125, 0.25, 0.5, 1],
]

# d=3 counts indexed by mask: {}:2 {1}:1 {2}:0 {1,2}:2 {3}:3 {1,3}:0 {2,3}:4 {1,2,3}:1
EXAMPLE_COUNTS = [2, 1, 0, 2, 3, 0, 4, 1]

# MLE in graded lattice order ({}, {1}, {2}, {3}, {12}, {13}, {23}, {123}), times 182
EXAMPLE_MLE_182 = [35, 7, 16, 35, 12, 7, 40, 30]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def moussouris() -> SampleCounts:
    return SampleCounts.from_rows(MOUSSOURIS_ROWS)


@pytest.fixture
def cycle4() -> Graph:
    return Graph(dim=4, edges=[(0, 1), (1, 2), (2, 3), (0, 3)])


@pytest.fixture
def example_counts() -> SampleCounts:
    return SampleCounts(dim=3, counts=EXAMPLE_COUNTS)


def random_mtp2_params(
    rng: np.random.Generator,
    graph: Graph,
    scale: float = 0.6,
    field: float = 0.4,
    symmetric: bool = False,
) -> IsingParams:
    """Ising parameters with J >= 0 supported on the graph."""
    d = graph.dim
    J = np.zeros((d, d))
    for i, j in graph.edges:
        J[i, j] = J[j, i] = rng.uniform(0.05, scale)
    h = np.zeros(d) if symmetric else rng.uniform(-field, field, size=d)
    return IsingParams(h=h, J=J)


def random_mtp2_table(rng: np.random.Generator, d: int, density: float = 0.6) -> ProbTable:
    edges = [e for e in combinations(range(d), 2) if rng.random() < density]
    return table_from_params(random_mtp2_params(rng, Graph(dim=d, edges=edges)))


def random_sample(rng: np.random.Generator, d: int, n: int) -> SampleCounts:
    """n draws from a random (not necessarily MTP2) distribution on {-1,1}^d."""
    weights = rng.dirichlet(np.full(1 << d, 0.7))
    masks = rng.choice(1 << d, size=n, p=weights)
    return SampleCounts.from_masks(d, masks)


def draw_sample(rng: np.random.Generator, p: ProbTable, n: int) -> SampleCounts:
    return SampleCounts.from_masks(p.dim, rng.choice(1 << p.dim, size=n, p=p.values))
