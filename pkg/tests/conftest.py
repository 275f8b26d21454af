"""Shared fixtures and small graph builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from graphdiff.communities import contiguous_partition
from graphdiff.graphs import WeightedGraph
from graphdiff.polyspace import BasisKind, explicit_set
from graphdiff.recovery import MeasurementSystem


def two_clique_graph(clique_size: int = 5) -> WeightedGraph:
    """Two cliques of the given size joined by a single bridge edge."""
    n = 2 * clique_size
    w = np.zeros((n, n))
    for offset in (0, clique_size):
        block = slice(offset, offset + clique_size)
        w[block, block] = 1.0
    np.fill_diagonal(w, 0.0)
    w[clique_size - 1, clique_size] = w[clique_size, clique_size - 1] = 1.0
    return WeightedGraph(n_nodes=n, weights=w)


def path_graph(n: int) -> WeightedGraph:
    w = np.zeros((n, n))
    for i in range(n - 1):
        w[i, i + 1] = w[i + 1, i] = 1.0
    return WeightedGraph(n_nodes=n, weights=w)


def raw_system(matrix, rhs) -> MeasurementSystem:
    """Measurement system around an explicit matrix, for solver unit tests."""
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    dummy = explicit_set(1, [[j] for j in range(matrix.shape[1])])
    return MeasurementSystem(
        matrix=matrix,
        rhs=rhs,
        sample_points=np.zeros((matrix.shape[0], 1)),
        index_set=dummy,
        basis=BasisKind.LEGENDRE,
    )


def identity_system(b) -> MeasurementSystem:
    """Measurement system with an identity matrix, for solver unit tests."""
    b = np.asarray(b, dtype=float)
    return raw_system(np.eye(b.size), b)


@pytest.fixture
def planted_two_cliques() -> WeightedGraph:
    return two_clique_graph(5)


@pytest.fixture
def small_partition():
    return contiguous_partition([5, 5])
