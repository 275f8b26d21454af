"""Community partitions, the pair-to-coordinate map, and fluid community detection."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graphs import WeightedGraph

__all__ = [
    "CommunityPartition",
    "BlockIndexMap",
    "DisconnectedGraphError",
    "block_index_map",
    "contiguous_partition",
    "fluid_communities",
    "dump_partition_json",
    "load_partition_json",
]


class DisconnectedGraphError(ValueError):
    """Fluid community detection requires a connected graph."""


@dataclass(frozen=True, eq=False)
class CommunityPartition:
    """Assignment of every node to one of K communities, labelled 1..K.

    Every label in 1..K must occur at least once: the communities form a
    partition with exactly K non-empty blocks.
    """

    assignment: np.ndarray
    n_communities: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        k = int(self.n_communities)
        if k < 1:
            raise ValueError("need at least one community")
        if a.ndim != 1 or a.size < 1:
            raise ValueError("assignment must be a non-empty vector")
        if a.min() < 1 or a.max() > k:
            raise ValueError(f"community ids must lie in 1..{k}")
        if len(np.unique(a)) != k:
            raise ValueError("every community id in 1..K must appear at least once")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "n_communities", k)

    @property
    def n_nodes(self) -> int:
        return self.assignment.size

    @property
    def sizes(self) -> np.ndarray:
        """Community sizes, index c-1 holding the size of community c."""
        return np.bincount(self.assignment, minlength=self.n_communities + 1)[1:]


def contiguous_partition(sizes) -> CommunityPartition:
    """Partition with the first ``sizes[0]`` nodes in community 1, and so on."""
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("sizes must be positive")
    assignment = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    return CommunityPartition(assignment=assignment, n_communities=len(sizes))


@dataclass(frozen=True)
class BlockIndexMap:
    """Bijection from unordered community pairs onto coordinates 1..d.

    Pairs (i, j) with 1 <= i <= j <= K are enumerated lexicographically:
    (1,1), (1,2), ..., (1,K), (2,2), ..., (K,K), giving d = K(K+1)/2
    coordinates. The map is symmetric in its arguments.
    """

    n_communities: int

    def __post_init__(self):
        if self.n_communities < 1:
            raise ValueError("need at least one community")

    @property
    def dimension(self) -> int:
        k = self.n_communities
        return k * (k + 1) // 2

    def index_of(self, i: int, j: int) -> int:
        """1-based coordinate for the pair of communities (i, j)."""
        k = self.n_communities
        if not (1 <= i <= k and 1 <= j <= k):
            raise ValueError(f"community ids must lie in 1..{k}")
        if i > j:
            i, j = j, i
        return (i - 1) * k - (i - 1) * (i - 2) // 2 + (j - i + 1)

    def pairs(self) -> list[tuple[int, int]]:
        """Community pairs in coordinate order."""
        k = self.n_communities
        return [(i, j) for i in range(1, k + 1) for j in range(i, k + 1)]

    def coordinate_matrix(self) -> np.ndarray:
        """K x K matrix whose (i-1, j-1) entry is index_of(i, j)."""
        k = self.n_communities
        out = np.empty((k, k), dtype=int)
        for i in range(1, k + 1):
            for j in range(1, k + 1):
                out[i - 1, j - 1] = self.index_of(i, j)
        return out


def block_index_map(n_communities: int) -> BlockIndexMap:
    return BlockIndexMap(n_communities=int(n_communities))


def fluid_communities(
    g: WeightedGraph,
    n_communities: int,
    seed: int,
    max_iter: int = 100,
) -> CommunityPartition:
    """Detect K communities by the fluid propagation heuristic.

    K fluids start at K distinct random nodes, each carrying total density
    one spread over its members. Nodes are swept in random order; each node
    moves to the community with the largest density sum over the node and
    its neighbors, ties broken uniformly at random with the run's seeded
    generator. Densities update after every move. Detection runs on the
    unweighted adjacency view and stops at the first sweep with no change,
    or after ``max_iter`` sweeps (returning the current partition with a
    warning).
    """
    k = int(n_communities)
    n = g.n_nodes
    if not 1 <= k <= n:
        raise ValueError(f"number of communities must lie in 1..{n}, got {k}")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    if not g.is_connected():
        raise DisconnectedGraphError("fluid community detection requires a connected graph")

    rng = np.random.default_rng(seed)
    neighbors = g.neighbor_lists()

    assignment = np.zeros(n, dtype=int)  # 0 = not yet claimed by any fluid
    counts = np.zeros(k + 1, dtype=int)
    density = np.zeros(k + 1)
    for c, node in enumerate(rng.permutation(n)[:k], start=1):
        assignment[node] = c
        counts[c] = 1
        density[c] = 1.0

    converged = False
    for _ in range(max_iter):
        changed = False
        for node in rng.permutation(n):
            scores: dict[int, float] = {}
            own = assignment[node]
            if own:
                scores[own] = density[own]
            for nb in neighbors[node]:
                c = assignment[nb]
                if c:
                    scores[c] = scores.get(c, 0.0) + density[c]
            if not scores:
                continue
            best = max(scores.values())
            candidates = [c for c, s in scores.items() if s == best]
            new = int(candidates[rng.integers(len(candidates))]) if len(candidates) > 1 else candidates[0]
            if new == own:
                continue
            if own and counts[own] == 1:
                continue  # keep all K fluids alive
            if own:
                counts[own] -= 1
                density[own] = 1.0 / counts[own]
            assignment[node] = new
            counts[new] += 1
            density[new] = 1.0 / counts[new]
            changed = True
        if not changed:
            converged = True
            break

    if not converged:
        warnings.warn(
            f"fluid communities did not converge within {max_iter} sweeps; returning current partition",
            RuntimeWarning,
            stacklevel=2,
        )

    # A tiny max_iter can leave nodes unclaimed; flood-fill from the claimed
    # frontier so the result is always a total partition with K blocks.
    if np.any(assignment == 0):
        queue = [i for i in range(n) if assignment[i]]
        head = 0
        while head < len(queue):
            node = queue[head]
            head += 1
            for nb in neighbors[node]:
                if assignment[nb] == 0:
                    assignment[nb] = assignment[node]
                    queue.append(int(nb))

    return CommunityPartition(assignment=assignment, n_communities=k)


def dump_partition_json(p: CommunityPartition, target) -> None:
    payload = {
        "K": p.n_communities,
        "assignment": p.assignment.tolist(),
        "sizes": p.sizes.tolist(),
    }
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
    else:
        json.dump(payload, target)


def load_partition_json(source) -> CommunityPartition:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    else:
        payload = json.load(source)
    return CommunityPartition(
        assignment=np.asarray(payload["assignment"], dtype=int),
        n_communities=int(payload["K"]),
    )
