"""End-to-end surrogate construction, evaluation, and error diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import sqrt
from pathlib import Path

import numpy as np

from .diffusion import DiffusionProblem, map_values
from .polyspace import (
    BasisKind,
    MultiIndexSet,
    eval_basis,
    intrinsic_weights,
    sample_measure,
)
from .recovery import SolverConfig, build_system, solve_least_squares, solve_qcbp, solve_srlasso

__all__ = [
    "METHODS",
    "SurrogateModel",
    "TestSet",
    "fit_surrogate",
    "evaluate",
    "rmse",
    "best_s_term_error",
    "make_test_set",
    "save_model",
    "load_model",
]

METHODS = ("ls", "qcbp", "wqcbp", "srlasso", "wsrlasso")


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    """Recovered coefficient vector over an index set, evaluable on [-1, 1]^d."""

    basis: BasisKind
    index_set: MultiIndexSet
    coefficients: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.shape != (len(self.index_set),):
            raise ValueError(
                f"coefficient vector has length {coeffs.shape}, index set has {len(self.index_set)}"
            )
        coeffs = coeffs.copy()
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "basis", BasisKind.coerce(self.basis))


@dataclass(frozen=True, eq=False)
class TestSet:
    """Held-out points and exact map values for scoring a surrogate."""

    __test__ = False  # not a pytest class, despite the name

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.points.shape[0] != self.values.shape[0]:
            raise ValueError("points and values must have matching lengths")


def make_test_set(problem: DiffusionProblem, node: int, size: int, seed: int) -> TestSet:
    """Test pairs with points always drawn uniformly on [-1, 1]^d."""
    if size < 1:
        raise ValueError("test set needs at least one point")
    points = sample_measure(BasisKind.LEGENDRE, problem.dimension, size, seed)
    return TestSet(points=points, values=map_values(problem, node, points))


def fit_surrogate(
    problem: DiffusionProblem,
    node: int,
    basis: BasisKind | str,
    index_set: MultiIndexSet,
    n_samples: int,
    method: str,
    *,
    seed: int,
    eta: float = 1e-8,
    lam: float | None = None,
    noise: np.ndarray | None = None,
    config: SolverConfig | None = None,
) -> SurrogateModel:
    """Sample the map, build the scaled system, and run the chosen decoder.

    Training points are drawn from the basis's own measure; the sample
    sequence and hence the fit are deterministic given the seed. ``eta``
    applies to the constrained decoders and ``lam`` to the square-root
    LASSO ones (default 1 / (8 sqrt(m))).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if n_samples < 1:
        raise ValueError("need at least one sample")
    basis = BasisKind.coerce(basis)
    if index_set.dimension != problem.dimension:
        raise ValueError(
            f"index set dimension {index_set.dimension} != parameter dimension {problem.dimension}"
        )

    points = sample_measure(basis, problem.dimension, n_samples, seed)
    values = map_values(problem, node, points)
    system = build_system(basis, index_set, points, values, noise=noise)

    weights = intrinsic_weights(basis, index_set) if method in ("wqcbp", "wsrlasso") else None
    if method == "ls":
        report = solve_least_squares(system)
    elif method in ("qcbp", "wqcbp"):
        report = solve_qcbp(system, eta=eta, weights=weights, config=config)
    else:
        lam_value = lam if lam is not None else 1.0 / (8.0 * sqrt(n_samples))
        report = solve_srlasso(system, lam=lam_value, weights=weights, config=config)

    metadata = {
        "method": method,
        "m": n_samples,
        "seed": seed,
        "node": node,
        "final_time": problem.final_time,
        "solver": {
            "iterations": report.iterations,
            "residual_norm": report.residual_norm,
            "objective": report.objective,
            "converged": report.converged,
            "warning": report.warning,
        },
    }
    return SurrogateModel(basis=basis, index_set=index_set, coefficients=report.solution, metadata=metadata)


def evaluate(model: SurrogateModel, points) -> np.ndarray:
    """Surrogate values at the given points (no system scaling involved)."""
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.zeros(0)
    points = np.atleast_2d(points)
    return eval_basis(model.basis, model.index_set, points) @ model.coefficients


def rmse(model: SurrogateModel, test: TestSet) -> float:
    """Root mean square error of the surrogate on a test set."""
    predictions = evaluate(model, test.points)
    return float(np.sqrt(np.mean((test.values - predictions) ** 2)))


def best_s_term_error(coefficients, s: int, q: float = 2.0) -> float:
    """lq norm of the coefficients after zeroing the s largest magnitudes.

    Ties in magnitude are broken by index order (earlier entries are kept
    first). ``q`` may be any positive exponent or infinity; s = 0 returns
    the full lq norm.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    if not q > 0:
        raise ValueError("q must be positive")
    c = np.asarray(coefficients, dtype=float)
    if s >= c.size:
        return 0.0
    order = np.argsort(-np.abs(c), kind="stable")
    tail = np.abs(c[order[s:]])
    if np.isinf(q):
        return float(tail.max(initial=0.0))
    return float(np.sum(tail**q) ** (1.0 / q))


def save_model(model: SurrogateModel, target) -> None:
    payload = {
        "basis": model.basis.value,
        "index_set": model.index_set.indices.tolist(),
        "coefficients": model.coefficients.tolist(),
        "metadata": model.metadata,
    }
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
    else:
        json.dump(payload, target)


def load_model(source) -> SurrogateModel:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    else:
        payload = json.load(source)
    indices = np.asarray(payload["index_set"], dtype=np.int64)
    index_set = MultiIndexSet(dimension=indices.shape[1], indices=indices)
    return SurrogateModel(
        basis=BasisKind.coerce(payload["basis"]),
        index_set=index_set,
        coefficients=np.asarray(payload["coefficients"], dtype=float),
        metadata=payload.get("metadata", {}),
    )
