"""Multi-index sets, orthonormal tensor polynomial bases, and their sampling measures.

Two families of index sets are provided: total degree, all nu with
sum(nu) <= n, and hyperbolic cross, all nu with prod(nu_k + 1) <= n + 1.
Both are downward closed. Bases are tensor products of univariate
polynomials orthonormal with respect to a probability measure on [-1, 1]:
Legendre with the uniform measure, Chebyshev with the arcsine measure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from math import comb, sqrt

import numpy as np

__all__ = [
    "BasisKind",
    "MultiIndexSet",
    "total_degree_set",
    "hyperbolic_cross_set",
    "explicit_set",
    "total_degree_cardinality",
    "hyperbolic_cross_cardinality",
    "order_with_cardinality",
    "closest_order",
    "is_lower",
    "eval_basis",
    "intrinsic_weights",
    "sample_measure",
]


class BasisKind(str, Enum):
    LEGENDRE = "legendre"
    CHEBYSHEV = "chebyshev"

    @classmethod
    def coerce(cls, value) -> "BasisKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True, eq=False)
class MultiIndexSet:
    """Ordered set of distinct multi-indices of a fixed dimension.

    The ordering is graded lexicographic (by total degree, then
    lexicographically), so coefficient vectors are comparable across runs.
    """

    dimension: int
    indices: np.ndarray
    provenance: str = "explicit"

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] != self.dimension:
            raise ValueError(f"indices must have shape (N, {self.dimension})")
        if idx.size and idx.min() < 0:
            raise ValueError("multi-index entries must be nonnegative")
        tuples = [tuple(row) for row in idx]
        if len(set(tuples)) != len(tuples):
            raise ValueError("duplicate multi-indices")
        order = sorted(range(len(tuples)), key=lambda i: (sum(tuples[i]), tuples[i]))
        idx = idx[order]
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.shape[0]

    @property
    def cardinality(self) -> int:
        return len(self)

    def as_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(v) for v in row) for row in self.indices]

    def max_degrees(self) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(self.dimension, dtype=np.int64)
        return self.indices.max(axis=0)

    def to_json(self) -> str:
        return json.dumps(self.indices.tolist())

    @classmethod
    def from_json(cls, text: str, dimension: int | None = None) -> "MultiIndexSet":
        rows = json.loads(text)
        if dimension is None:
            if not rows:
                raise ValueError("dimension required for an empty index set")
            dimension = len(rows[0])
        return cls(dimension=dimension, indices=np.asarray(rows, dtype=np.int64).reshape(len(rows), dimension))


def _total_degree_tuples(dimension: int, order: int):
    if dimension == 1:
        for k in range(order + 1):
            yield (k,)
        return
    for k in range(order + 1):
        for rest in _total_degree_tuples(dimension - 1, order - k):
            yield (k,) + rest


def total_degree_set(dimension: int, order: int) -> MultiIndexSet:
    """All multi-indices with total degree at most ``order``."""
    if dimension < 1:
        raise ValueError("dimension must be at least 1")
    if order < 0:
        raise ValueError("order must be nonnegative")
    rows = np.array(list(_total_degree_tuples(dimension, order)), dtype=np.int64)
    return MultiIndexSet(dimension=dimension, indices=rows, provenance=f"total_degree({order})")


def _hyperbolic_tuples(dimension: int, budget: int):
    # budget bounds the remaining product of (nu_k + 1)
    if dimension == 0:
        yield ()
        return
    v = 0
    while v + 1 <= budget:
        for rest in _hyperbolic_tuples(dimension - 1, budget // (v + 1)):
            yield (v,) + rest
        v += 1


def hyperbolic_cross_set(dimension: int, order: int) -> MultiIndexSet:
    """All multi-indices with prod(nu_k + 1) at most ``order + 1``."""
    if dimension < 1:
        raise ValueError("dimension must be at least 1")
    if order < 0:
        raise ValueError("order must be nonnegative")
    rows = np.array(list(_hyperbolic_tuples(dimension, order + 1)), dtype=np.int64)
    return MultiIndexSet(dimension=dimension, indices=rows, provenance=f"hyperbolic_cross({order})")


def explicit_set(dimension: int, indices) -> MultiIndexSet:
    return MultiIndexSet(dimension=dimension, indices=np.asarray(indices, dtype=np.int64))


def total_degree_cardinality(dimension: int, order: int) -> int:
    return comb(order + dimension, dimension)


def hyperbolic_cross_cardinality(dimension: int, order: int) -> int:
    """Cardinality of the hyperbolic cross without materializing it."""
    cache: dict[tuple[int, int], int] = {}

    def count(d: int, budget: int) -> int:
        if d == 0:
            return 1
        key = (d, budget)
        if key not in cache:
            total = 0
            v = 1
            while v <= budget:
                total += count(d - 1, budget // v)
                v += 1
            cache[key] = total
        return cache[key]

    return count(dimension, order + 1)


_FAMILIES = {
    "total_degree": (total_degree_cardinality, total_degree_set),
    "hyperbolic_cross": (hyperbolic_cross_cardinality, hyperbolic_cross_set),
}


def build_index_set(family: str, dimension: int, order: int) -> MultiIndexSet:
    if family not in _FAMILIES:
        raise ValueError(f"unknown index family {family!r}; expected one of {tuple(_FAMILIES)}")
    return _FAMILIES[family][1](dimension, order)


def order_with_cardinality(family: str, dimension: int, target: int, max_order: int = 100_000) -> int | None:
    """Smallest order whose index set has exactly ``target`` indices, or None.

    Cardinality is nondecreasing in the order, so the scan is conclusive:
    None means no order of this family attains the target cardinality.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown index family {family!r}")
    count = _FAMILIES[family][0]
    lo, hi = 0, 1
    while count(dimension, hi) < target:
        lo, hi = hi, hi * 2
        if hi > max_order:
            return None
    while lo < hi:
        mid = (lo + hi) // 2
        if count(dimension, mid) < target:
            lo = mid + 1
        else:
            hi = mid
    return lo if count(dimension, lo) == target else None


def closest_order(family: str, dimension: int, target: int, max_order: int = 100_000) -> int:
    """Order whose cardinality is closest to ``target`` (smaller order on ties)."""
    if family not in _FAMILIES:
        raise ValueError(f"unknown index family {family!r}")
    count = _FAMILIES[family][0]
    hi = 1
    while count(dimension, hi) < target:
        hi *= 2
        if hi > max_order:
            raise ValueError(f"target cardinality {target} not reachable below order {max_order}")
    best_n, best_gap = 0, abs(count(dimension, 0) - target)
    for n in range(1, hi + 1):
        gap = abs(count(dimension, n) - target)
        if gap < best_gap:
            best_n, best_gap = n, gap
        if count(dimension, n) >= target and gap >= best_gap:
            break
    return best_n


def is_lower(s: MultiIndexSet) -> bool:
    """True if the set is downward closed under the componentwise order."""
    members = set(s.as_tuples())
    for nu in members:
        for k, v in enumerate(nu):
            if v > 0 and nu[:k] + (v - 1,) + nu[k + 1:] not in members:
                return False
    return True


def _legendre_table(x: np.ndarray, max_degree: int) -> np.ndarray:
    """Orthonormal Legendre values, shape (len(x), max_degree + 1).

    Three-term recurrence on the classical polynomials, then scaled by
    sqrt(2k + 1) to be orthonormal for the uniform measure dx/2 on [-1, 1].
    """
    table = np.ones((x.size, max_degree + 1))
    if max_degree >= 1:
        table[:, 1] = x
    for k in range(1, max_degree):
        table[:, k + 1] = ((2 * k + 1) * x * table[:, k] - k * table[:, k - 1]) / (k + 1)
    return table * np.sqrt(2 * np.arange(max_degree + 1) + 1)


def _chebyshev_table(x: np.ndarray, max_degree: int) -> np.ndarray:
    """Orthonormal Chebyshev values for the arcsine measure: 1, sqrt(2) T_k."""
    table = np.ones((x.size, max_degree + 1))
    if max_degree >= 1:
        table[:, 1] = x
    for k in range(1, max_degree):
        table[:, k + 1] = 2 * x * table[:, k] - table[:, k - 1]
    if max_degree >= 1:
        table[:, 1:] *= sqrt(2.0)
    return table


def eval_basis(kind: BasisKind | str, s: MultiIndexSet, points: np.ndarray) -> np.ndarray:
    """Basis matrix with entry (i, j) the j-th basis polynomial at point i."""
    kind = BasisKind.coerce(kind)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != s.dimension:
        raise ValueError(f"points must have {s.dimension} columns, got {points.shape[1]}")
    if points.size and (points.min() < -1.0 or points.max() > 1.0):
        raise ValueError("points must lie in [-1, 1]^d")
    table = _legendre_table if kind is BasisKind.LEGENDRE else _chebyshev_table
    max_deg = s.max_degrees()
    out = np.ones((points.shape[0], len(s)))
    for j in range(s.dimension):
        univariate = table(points[:, j], int(max_deg[j]))
        out *= univariate[:, s.indices[:, j]]
    return out


def intrinsic_weights(kind: BasisKind | str, s: MultiIndexSet) -> np.ndarray:
    """Sup-norms of the basis polynomials on [-1, 1]^d.

    Legendre attains its sup at 1, giving prod(sqrt(2 nu_k + 1)); each
    nonzero Chebyshev factor contributes sqrt(2).
    """
    kind = BasisKind.coerce(kind)
    if kind is BasisKind.LEGENDRE:
        return np.sqrt(np.prod(2.0 * s.indices + 1.0, axis=1))
    return np.sqrt(2.0) ** np.count_nonzero(s.indices, axis=1)


def sample_measure(kind: BasisKind | str, dimension: int, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` i.i.d. points from the basis's probability measure.

    Uniform on [-1, 1]^d for Legendre; cos(pi * U) with U uniform on [0, 1]
    per coordinate for Chebyshev (the arcsine law).
    """
    if count < 1:
        raise ValueError("need at least one sample")
    if dimension < 1:
        raise ValueError("dimension must be at least 1")
    kind = BasisKind.coerce(kind)
    rng = np.random.default_rng(seed)
    if kind is BasisKind.LEGENDRE:
        return rng.uniform(-1.0, 1.0, size=(count, dimension))
    return np.cos(np.pi * rng.random(size=(count, dimension)))
