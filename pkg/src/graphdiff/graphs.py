"""Weighted graphs: block-model sampling, Laplacians, edge-list ingestion.

A graph is stored as a dense symmetric weight matrix with zero diagonal.
The unweighted adjacency and node degrees are derived views, never stored.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "WeightedGraph",
    "SbmSpec",
    "EdgeListParseError",
    "generate_sbm",
    "laplacian",
    "parse_edge_list",
    "load_graph_json",
    "dump_graph_json",
    "fixture_edge_list_path",
]

SYMMETRIZE_RULES = ("max", "mean", "sum")


class EdgeListParseError(ValueError):
    """Malformed edge-list input. Carries the offending 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected weighted graph on nodes 0..n_nodes-1.

    ``weights`` must be symmetric (bit-exact), nonnegative, with zero
    diagonal. Instances are immutable: the weight matrix is marked
    read-only so a graph can be shared freely across threads.
    """

    n_nodes: int
    weights: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one node")
        if w.shape != (self.n_nodes, self.n_nodes):
            raise ValueError(f"weight matrix shape {w.shape} != ({self.n_nodes}, {self.n_nodes})")
        if not np.array_equal(w, w.T):
            raise ValueError("weight matrix must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("weight matrix must have zero diagonal")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        if self.labels is not None and len(self.labels) != self.n_nodes:
            raise ValueError("labels length must equal n_nodes")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def adjacency(self) -> np.ndarray:
        """Unweighted 0/1 adjacency derived from the weights."""
        return (self.weights != 0.0).astype(float)

    def degrees(self, weighted: bool = False) -> np.ndarray:
        m = self.weights if weighted else self.adjacency()
        return m.sum(axis=1)

    @property
    def edge_count(self) -> int:
        """Number of unordered edges (nonzero upper-triangle entries)."""
        return int(np.count_nonzero(np.triu(self.weights, k=1)))

    def neighbor_lists(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.weights[i]) for i in range(self.n_nodes)]

    def is_connected(self) -> bool:
        seen = np.zeros(self.n_nodes, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(self.weights[i]):
                if not seen[j]:
                    seen[j] = True
                    stack.append(int(j))
        return bool(seen.all())


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model: community sizes plus intra/inter edge probabilities."""

    community_sizes: tuple[int, ...]
    p_intra: float
    p_inter: float
    edge_weight: float = 1.0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.community_sizes)
        if len(sizes) == 0:
            raise ValueError("community_sizes must be non-empty")
        if any(s < 1 for s in sizes):
            raise ValueError("community sizes must be positive")
        for name, p in (("p_intra", self.p_intra), ("p_inter", self.p_inter)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.edge_weight > 0:
            raise ValueError("edge_weight must be positive")
        object.__setattr__(self, "community_sizes", sizes)

    @property
    def n_nodes(self) -> int:
        return sum(self.community_sizes)

    @property
    def n_communities(self) -> int:
        return len(self.community_sizes)


def generate_sbm(spec: SbmSpec, seed: int) -> WeightedGraph:
    """Sample a graph from the block model, reproducibly for a given seed.

    Each unordered pair of nodes gets an edge independently, with
    probability ``p_intra`` if both endpoints share a community and
    ``p_inter`` otherwise.
    """
    n = spec.n_nodes
    membership = np.repeat(np.arange(spec.n_communities), spec.community_sizes)
    rng = np.random.default_rng(seed)
    draws = rng.random((n, n))
    same = membership[:, None] == membership[None, :]
    prob = np.where(same, spec.p_intra, spec.p_inter)
    upper = np.triu(draws < prob, k=1)
    w = np.where(upper, spec.edge_weight, 0.0)
    w = w + w.T
    return WeightedGraph(n_nodes=n, weights=w)


def laplacian(g: WeightedGraph, weighted: bool = False) -> np.ndarray:
    """Graph Laplacian, degree matrix minus adjacency.

    The diagonal is the negated sum of the off-diagonal row entries, so
    rows sum to zero by construction rather than by separate arithmetic.
    """
    a = g.weights if weighted else g.adjacency()
    lap = -np.array(a, dtype=float)
    np.fill_diagonal(lap, 0.0)
    np.fill_diagonal(lap, -lap.sum(axis=1))
    return lap


def _combine(values: list[float], rule: str) -> float:
    if rule == "max":
        return max(values)
    if rule == "mean":
        return sum(values) / len(values)
    if rule == "sum":
        return sum(values)
    raise ValueError(f"unknown symmetrize rule {rule!r}; expected one of {SYMMETRIZE_RULES}")


def parse_edge_list(
    source,
    *,
    weighted: bool = True,
    symmetrize: str = "mean",
    index_base: int = 0,
    comment_prefix: str = "#",
) -> WeightedGraph:
    """Parse a plain-text edge list ("u v" or "u v w" per line) into a graph.

    Node ids may be arbitrary nonnegative integers; they are compacted to
    0..n-1 in first-appearance order, with the original ids kept as labels.
    Duplicate and antiparallel entries for the same unordered pair are
    combined by the ``symmetrize`` rule (max, mean or sum); self-loops are
    dropped. ``index_base`` only validates that no id is below it.
    """
    if symmetrize not in SYMMETRIZE_RULES:
        raise ValueError(f"unknown symmetrize rule {symmetrize!r}; expected one of {SYMMETRIZE_RULES}")
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    ids: dict[str, int] = {}
    pair_weights: dict[tuple[int, int], list[float]] = {}

    def node_id(token: str, line_no: int) -> int:
        if token not in ids:
            try:
                value = int(token)
            except ValueError:
                raise EdgeListParseError(line_no, f"node id {token!r} is not an integer") from None
            if value < index_base:
                raise EdgeListParseError(line_no, f"node id {value} below index base {index_base}")
            ids[token] = len(ids)
        return ids[token]

    for line_no, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(comment_prefix):
            continue
        fields = stripped.split()
        if len(fields) not in (2, 3):
            raise EdgeListParseError(line_no, f"expected 'u v' or 'u v w', got {len(fields)} fields")
        u = node_id(fields[0], line_no)
        v = node_id(fields[1], line_no)
        if weighted and len(fields) == 3:
            try:
                w = float(fields[2])
            except ValueError:
                raise EdgeListParseError(line_no, f"weight {fields[2]!r} is not a number") from None
            if not np.isfinite(w):
                raise EdgeListParseError(line_no, f"weight {fields[2]!r} is not finite")
        else:
            w = 1.0
        if w < 0:
            raise ValueError(f"line {line_no}: negative weight {w}")
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        pair_weights.setdefault(key, []).append(w)

    n = len(ids)
    if n == 0:
        raise EdgeListParseError(0, "no nodes found in input")
    weights = np.zeros((n, n))
    for (u, v), values in pair_weights.items():
        weights[u, v] = weights[v, u] = _combine(values, symmetrize)
    labels = tuple(ids.keys())
    return WeightedGraph(n_nodes=n, weights=weights, labels=labels)


def dump_graph_json(g: WeightedGraph, target) -> None:
    """Write the canonical graph file: node count plus COO triplet list."""
    rows, cols = np.nonzero(np.triu(g.weights, k=1))
    payload = {
        "n_nodes": g.n_nodes,
        "edges": [[int(i), int(j), float(g.weights[i, j])] for i, j in zip(rows, cols)],
    }
    if g.labels is not None:
        payload["labels"] = list(g.labels)
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
    else:
        json.dump(payload, target)


def load_graph_json(source) -> WeightedGraph:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    else:
        payload = json.load(source)
    n = int(payload["n_nodes"])
    weights = np.zeros((n, n))
    for i, j, w in payload["edges"]:
        i, j, w = int(i), int(j), float(w)
        if not 0 <= i < n or not 0 <= j < n:
            raise ValueError(f"edge ({i}, {j}) out of range for {n} nodes")
        if i == j:
            raise ValueError(f"self-loop on node {i} not allowed")
        weights[i, j] = weights[j, i] = w
    labels = tuple(payload["labels"]) if "labels" in payload else None
    return WeightedGraph(n_nodes=n, weights=weights, labels=labels)


def fixture_edge_list_path() -> Path:
    """Bundled 50-node edge-list fixture, used when real datasets are absent."""
    return Path(__file__).parent / "data" / "fixture_edges.txt"
