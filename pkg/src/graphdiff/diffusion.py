"""Parametric diffusion on a weighted graph.

The diffusivity of every edge is shared across community pairs: coordinate
y_k in [-1, 1] scales the coupling of one pair of communities through the
affine factor (y_k + 1)/2, optionally modulated by a continuous time
profile h_k(t). The flow operator has zero column sums by construction,
so the total mass sum(u) is conserved exactly by the dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .communities import BlockIndexMap, CommunityPartition, block_index_map
from .graphs import WeightedGraph

__all__ = [
    "TimeProfile",
    "DiffusivitySpec",
    "DiffusionProblem",
    "BlowupError",
    "assemble_diffusivity",
    "assemble_operator",
    "solve_diffusion",
    "solution_map",
]

# Step control for the fixed-step RK4 path: h * max_t ||M(t)||_inf <= this.
_RK4_STEP_FACTOR = 0.1
_RK4_RTOL = 1e-8
_MAX_REFINEMENTS = 12


class BlowupError(ArithmeticError):
    """Non-finite state during time integration; carries max ||M||_inf seen."""

    def __init__(self, max_norm: float):
        super().__init__(f"diffusion state became non-finite (max operator inf-norm {max_norm:.3e})")
        self.max_norm = max_norm


@dataclass(frozen=True)
class TimeProfile:
    """Continuous scalar profile on [0, T].

    Kinds: ``constant`` (value), ``polynomial`` (coefficients, low order
    first) and ``sinusoid`` (amplitude, angular frequency, phase, offset).
    """

    kind: str
    params: tuple[float, ...]

    _KINDS = ("constant", "polynomial", "sinusoid")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind == "constant" and len(self.params) != 1:
            raise ValueError("constant profile takes exactly one value")
        if self.kind == "polynomial" and len(self.params) < 1:
            raise ValueError("polynomial profile needs at least one coefficient")
        if self.kind == "sinusoid" and len(self.params) != 4:
            raise ValueError("sinusoid profile takes (amplitude, frequency, phase, offset)")

    @classmethod
    def constant(cls, value: float = 1.0) -> "TimeProfile":
        return cls("constant", (value,))

    @classmethod
    def polynomial(cls, coeffs) -> "TimeProfile":
        return cls("polynomial", tuple(coeffs))

    @classmethod
    def sinusoid(cls, amplitude: float, frequency: float, phase: float = 0.0, offset: float = 0.0) -> "TimeProfile":
        return cls("sinusoid", (amplitude, frequency, phase, offset))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return self.params[0]
        if self.kind == "polynomial":
            return float(np.polynomial.polynomial.polyval(t, self.params))
        amplitude, frequency, phase, offset = self.params
        return amplitude * math.sin(frequency * t + phase) + offset

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, payload: dict) -> "TimeProfile":
        return cls(payload["kind"], tuple(payload["params"]))


@dataclass(frozen=True)
class DiffusivitySpec:
    """Block-constant parametric diffusivity map (t, y) -> C(t, y).

    The entry for nodes (u, v) is ((y_k + 1)/2) * h_k(t) with
    k = block_map.index_of(community(u), community(v)). Diagonal entries
    carry the intra-community value of their block; they never reach the
    flow operator because the graph weights have zero diagonal.
    """

    partition: CommunityPartition
    block_map: BlockIndexMap
    profiles: tuple[TimeProfile, ...]

    def __post_init__(self):
        if self.block_map.n_communities != self.partition.n_communities:
            raise ValueError("block map and partition disagree on the number of communities")
        if len(self.profiles) != self.block_map.dimension:
            raise ValueError(
                f"expected {self.block_map.dimension} time profiles, got {len(self.profiles)}"
            )

    @classmethod
    def for_partition(cls, partition: CommunityPartition, profiles=None) -> "DiffusivitySpec":
        bmap = block_index_map(partition.n_communities)
        if profiles is None:
            profiles = tuple(TimeProfile.constant(1.0) for _ in range(bmap.dimension))
        return cls(partition=partition, block_map=bmap, profiles=tuple(profiles))

    @property
    def dimension(self) -> int:
        return self.block_map.dimension

    @property
    def is_time_invariant(self) -> bool:
        return all(p.is_constant for p in self.profiles)


@dataclass(frozen=True)
class DiffusionProblem:
    """Initial-value problem du/dt = M(t, y) u on a fixed graph."""

    graph: WeightedGraph
    diffusivity: DiffusivitySpec
    u0: np.ndarray
    final_time: float

    def __post_init__(self):
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape != (self.graph.n_nodes,):
            raise ValueError(f"u0 must have length {self.graph.n_nodes}")
        if not self.final_time > 0:
            raise ValueError("final time must be positive")
        if self.diffusivity.partition.n_nodes != self.graph.n_nodes:
            raise ValueError("partition covers a different number of nodes than the graph")
        u0 = u0.copy()
        u0.flags.writeable = False
        object.__setattr__(self, "u0", u0)

    @classmethod
    def standard(
        cls,
        graph: WeightedGraph,
        partition: CommunityPartition,
        final_time: float = 1.0,
        u0: np.ndarray | None = None,
        profiles=None,
    ) -> "DiffusionProblem":
        """Problem with unit mass at the first node unless u0 is given."""
        if u0 is None:
            u0 = np.zeros(graph.n_nodes)
            u0[0] = 1.0
        spec = DiffusivitySpec.for_partition(partition, profiles)
        return cls(graph=graph, diffusivity=spec, u0=np.asarray(u0, dtype=float), final_time=final_time)

    @property
    def dimension(self) -> int:
        return self.diffusivity.dimension


def assemble_diffusivity(spec: DiffusivitySpec, t: float, y: np.ndarray) -> np.ndarray:
    """Node-level diffusivity matrix C(t, y); symmetric and block-constant."""
    y = np.asarray(y, dtype=float)
    d = spec.dimension
    if y.shape != (d,):
        raise ValueError(f"parameter vector must have length {d}, got shape {y.shape}")
    coord = spec.block_map.coordinate_matrix() - 1  # 0-based coordinates per block
    scale = (y + 1.0) / 2.0
    hvals = np.array([p(t) for p in spec.profiles])
    block_values = scale[coord] * hvals[coord]
    cidx = spec.partition.assignment - 1
    return block_values[np.ix_(cidx, cidx)]


def assemble_operator(c: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Flow operator from diffusivity C and weights W.

    Off-diagonal entries are C_ij * W_ij; each diagonal entry is the
    negated sum of its column, so column sums vanish by construction.
    """
    c = np.asarray(c, dtype=float)
    w = np.asarray(w, dtype=float)
    if c.shape != w.shape or c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"shape mismatch: C {c.shape} vs W {w.shape}")
    coupling = c * w
    np.fill_diagonal(coupling, 0.0)  # W has zero diagonal; keep it explicit
    return coupling - np.diag(coupling.sum(axis=0))


def _operator_at(problem: DiffusionProblem, y: np.ndarray, t: float) -> np.ndarray:
    c = assemble_diffusivity(problem.diffusivity, t, y)
    return assemble_operator(c, problem.graph.weights)


def _max_operator_norm(problem: DiffusionProblem, y: np.ndarray, samples: int = 65) -> float:
    """Max over t of the induced inf-norm of M(t, y), on a sample grid."""
    if problem.diffusivity.is_time_invariant:
        m = _operator_at(problem, y, 0.0)
        return float(np.abs(m).sum(axis=1).max())
    times = np.linspace(0.0, problem.final_time, samples)
    return max(float(np.abs(_operator_at(problem, y, t)).sum(axis=1).max()) for t in times)


def _solve_expm(problem: DiffusionProblem, y: np.ndarray) -> np.ndarray:
    m = _operator_at(problem, y, 0.0)
    eigvals, eigvecs = np.linalg.eigh(m)
    return eigvecs @ (np.exp(problem.final_time * eigvals) * (eigvecs.T @ problem.u0))


def _rk4_run(problem: DiffusionProblem, y: np.ndarray, n_steps: int, max_norm: float) -> np.ndarray:
    t_final = problem.final_time
    h = t_final / n_steps
    u = np.array(problem.u0, dtype=float)
    time_invariant = problem.diffusivity.is_time_invariant
    m_const = _operator_at(problem, y, 0.0) if time_invariant else None

    def rhs(t: float, state: np.ndarray) -> np.ndarray:
        m = m_const if time_invariant else _operator_at(problem, y, t)
        return m @ state

    t = 0.0
    for _ in range(n_steps):
        k1 = rhs(t, u)
        k2 = rhs(t + h / 2, u + (h / 2) * k1)
        k3 = rhs(t + h / 2, u + (h / 2) * k2)
        k4 = rhs(t + h, u + h * k3)
        u = u + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        if not np.all(np.isfinite(u)):
            raise BlowupError(max_norm)
    return u


def _solve_rk4(problem: DiffusionProblem, y: np.ndarray, rtol: float = _RK4_RTOL) -> np.ndarray:
    max_norm = _max_operator_norm(problem, y)
    n_steps = max(1, math.ceil(problem.final_time * max_norm / _RK4_STEP_FACTOR))
    coarse = _rk4_run(problem, y, n_steps, max_norm)
    for _ in range(_MAX_REFINEMENTS):
        n_steps *= 2
        fine = _rk4_run(problem, y, n_steps, max_norm)
        change = np.linalg.norm(fine - coarse) / max(np.linalg.norm(fine), 1.0)
        if change < rtol:
            return fine
        coarse = fine
    raise ArithmeticError(
        f"step-halving verification did not reach rtol={rtol:.1e} "
        f"within {_MAX_REFINEMENTS} refinements (max operator inf-norm {max_norm:.3e})"
    )


def solve_diffusion(problem: DiffusionProblem, y, method: str = "auto") -> np.ndarray:
    """State u(T) for parameter y in [-1, 1]^d.

    With all profiles constant the operator is symmetric and constant, and
    the solution is computed through its eigendecomposition. Otherwise a
    fixed-step fourth-order Runge-Kutta scheme is used, with the step
    bounded by the operator norm and verified by step halving. ``method``
    forces a path ("expm" or "rk4"); "expm" requires constant profiles.
    """
    y = np.asarray(y, dtype=float)
    if method not in ("auto", "expm", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    if method == "expm" or (method == "auto" and problem.diffusivity.is_time_invariant):
        if not problem.diffusivity.is_time_invariant:
            raise ValueError("eigendecomposition path requires constant time profiles")
        return _solve_expm(problem, y)
    return _solve_rk4(problem, y)


def solution_map(problem: DiffusionProblem, node: int) -> Callable[[np.ndarray], float]:
    """Scalar parameter-to-solution map y -> u_node(T) for one observed node."""
    if not 0 <= node < problem.graph.n_nodes:
        raise ValueError(f"node {node} out of range for {problem.graph.n_nodes} nodes")

    def value_at(y) -> float:
        return float(solve_diffusion(problem, y)[node])

    return value_at


def map_values(problem: DiffusionProblem, node: int, points: np.ndarray) -> np.ndarray:
    """Evaluate the parameter-to-solution map at each row of ``points``."""
    f = solution_map(problem, node)
    points = np.asarray(points, dtype=float)
    return np.array([f(y) for y in points])
