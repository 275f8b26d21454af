"""Measurement systems and the coefficient decoders.

Four decoders over the row-scaled system: plain least squares (QR), and
three l1-based solvers for the underdetermined regime, all driven by the
same primal-dual iteration: quadratically constrained basis pursuit,
square-root LASSO, and their weighted variants. Every solver is
deterministic given its inputs; there are no randomized internals.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np
from scipy.linalg import solve_triangular

from .polyspace import BasisKind, MultiIndexSet, eval_basis

__all__ = [
    "MeasurementSystem",
    "SolverConfig",
    "SolverReport",
    "UnderdeterminedSystemError",
    "IllConditionedSystemError",
    "build_system",
    "solve_least_squares",
    "solve_qcbp",
    "solve_srlasso",
    "spectral_norm",
]

CONDITION_LIMIT = 1e12


class UnderdeterminedSystemError(ValueError):
    """Least squares needs at least as many samples as coefficients."""


class IllConditionedSystemError(ValueError):
    """Measurement matrix is numerically rank deficient."""


@dataclass(frozen=True, eq=False)
class MeasurementSystem:
    """Sampled basis matrix and right-hand side, both scaled by 1/sqrt(m).

    Column j of ``matrix`` evaluates index_set[j] at the sample points;
    ``rhs`` holds the (optionally noisy) function values under the same
    scaling, applied exactly once at construction.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    sample_points: np.ndarray
    index_set: MultiIndexSet
    basis: BasisKind

    @property
    def n_samples(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_coefficients(self) -> int:
        return self.matrix.shape[1]


def build_system(
    basis: BasisKind | str,
    index_set: MultiIndexSet,
    points: np.ndarray,
    values: np.ndarray,
    noise: np.ndarray | None = None,
) -> MeasurementSystem:
    basis = BasisKind.coerce(basis)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float)
    m = points.shape[0]
    if values.shape != (m,):
        raise ValueError(f"values must have length {m}, got shape {values.shape}")
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != (m,):
            raise ValueError(f"noise must have length {m}, got shape {noise.shape}")
        values = values + noise
    scale = 1.0 / sqrt(m)
    matrix = eval_basis(basis, index_set, points) * scale
    return MeasurementSystem(
        matrix=matrix,
        rhs=values * scale,
        sample_points=points,
        index_set=index_set,
        basis=basis,
    )


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 5000
    tol: float = 1e-8

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class SolverReport:
    """Decoder output; ``residual_norm`` is recomputed from the solution at exit."""

    solution: np.ndarray
    iterations: int
    residual_norm: float
    objective: float
    converged: bool
    method: str
    warning: str | None = None


def solve_least_squares(system: MeasurementSystem) -> SolverReport:
    """Minimize the residual 2-norm by QR factorization.

    Requires an overdetermined system. The normal-equation residual of the
    returned solution is at machine-precision scale; rank deficiency
    (condition estimate above 1e12) is rejected.
    """
    a, b = system.matrix, system.rhs
    m, n = a.shape
    if m < n:
        raise UnderdeterminedSystemError(
            f"{m} samples for {n} coefficients; use a compressed-sensing decoder "
            "(qcbp / srlasso) for underdetermined systems"
        )
    q, r = np.linalg.qr(a, mode="reduced")
    condition = np.linalg.cond(r)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise IllConditionedSystemError(f"condition estimate {condition:.3e} exceeds {CONDITION_LIMIT:.0e}")
    coeffs = solve_triangular(r, q.T @ b)
    residual = float(np.linalg.norm(a @ coeffs - b))
    return SolverReport(
        solution=coeffs,
        iterations=1,
        residual_norm=residual,
        objective=residual**2,
        converged=True,
        method="ls",
    )


def spectral_norm(a: np.ndarray, max_iter: int = 100, rtol: float = 1e-8) -> float:
    """Largest singular value by the power method on A^T A.

    Deterministic: starts from a fixed ramp vector rather than a random one.
    """
    n = a.shape[1]
    v = np.linspace(1.0, 2.0, n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = a.T @ (a @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        new_estimate = sqrt(norm)
        v = w / norm
        if abs(new_estimate - estimate) <= rtol * new_estimate:
            return new_estimate
        estimate = new_estimate
    return estimate


def _soft_threshold(x: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - thresholds, 0.0)


def _check_weights(weights, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n,):
        raise ValueError(f"weights must have length {n}")
    if np.any(weights <= 0):
        raise ValueError("weights must be strictly positive")
    return weights


def solve_qcbp(
    system: MeasurementSystem,
    eta: float,
    weights: np.ndarray | None = None,
    config: SolverConfig | None = None,
) -> SolverReport:
    """Minimize the weighted l1 norm subject to a residual-norm budget eta.

    Primal-dual iteration with steps tau = sigma = 0.99 / ||A||_2: the dual
    step forms xi_t = xi + sigma (A zbar - b) and scales it by
    max(0, 1 - sigma eta / ||xi_t||); the primal step soft-thresholds
    z - tau A^T xi with per-coefficient thresholds tau * w. Convergence
    requires both primal and dual relative changes below tol and the
    residual within eta * (1 + 1e-6) + tol * min(1, ||b||); otherwise the
    loop runs to max_iter. If the residual stalls clearly above eta, an
    infeasibility warning is attached.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    cfg = config or SolverConfig()
    a, b = system.matrix, system.rhs
    m, n = a.shape
    w = _check_weights(weights, n)

    opnorm = spectral_norm(a)
    if opnorm == 0.0:
        warning = None if np.linalg.norm(b) <= eta else "zero operator cannot reach the residual budget"
        return SolverReport(
            solution=np.zeros(n),
            iterations=0,
            residual_norm=float(np.linalg.norm(b)),
            objective=0.0,
            converged=warning is None,
            method="qcbp",
            warning=warning,
        )
    tau = sigma = 0.99 / opnorm
    thresholds = tau * w
    residual_bound = eta * (1.0 + 1e-6) + cfg.tol * min(1.0, float(np.linalg.norm(b)))

    z = np.zeros(n)
    az = np.zeros(m)
    az_old = np.zeros(m)
    xi = np.zeros(m)
    iterations = cfg.max_iter
    converged = False
    for k in range(1, cfg.max_iter + 1):
        xi_t = xi + sigma * ((2.0 * az - az_old) - b)
        norm_xi = np.linalg.norm(xi_t)
        xi_new = xi_t * max(0.0, 1.0 - sigma * eta / norm_xi) if norm_xi > 0 else xi_t
        z_new = _soft_threshold(z - tau * (a.T @ xi_new), thresholds)
        az_old = az
        az = a @ z_new

        primal_change = np.linalg.norm(z_new - z) / max(np.linalg.norm(z_new), 1.0)
        dual_change = np.linalg.norm(xi_new - xi) / max(np.linalg.norm(xi_new), 1.0)
        z, xi = z_new, xi_new
        if (
            primal_change < cfg.tol
            and dual_change < cfg.tol
            and np.linalg.norm(az - b) <= residual_bound
        ):
            iterations = k
            converged = True
            break

    residual = float(np.linalg.norm(az - b))
    warning = None
    if residual > eta + 1e3 * cfg.tol:
        warning = (
            f"residual {residual:.3e} stalled above eta={eta:.3e}; "
            "the residual budget may be infeasible for this system"
        )
    return SolverReport(
        solution=z,
        iterations=iterations,
        residual_norm=residual,
        objective=float(np.sum(w * np.abs(z))),
        converged=converged,
        method="qcbp",
        warning=warning,
    )


def solve_srlasso(
    system: MeasurementSystem,
    lam: float,
    weights: np.ndarray | None = None,
    config: SolverConfig | None = None,
) -> SolverReport:
    """Minimize lam * ||z||_{1,w} + ||A z - b||_2.

    Same primal-dual scheme as the constrained decoder, with the dual of
    the residual term projected onto the unit l2 ball. The best objective
    seen is tracked, and the returned solution is never worse than it by
    more than tol * (1 + ||b||_2).
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    cfg = config or SolverConfig()
    a, b = system.matrix, system.rhs
    m, n = a.shape
    w = _check_weights(weights, n)

    def objective(z_vec, residual_vec):
        return lam * float(np.sum(w * np.abs(z_vec))) + float(np.linalg.norm(residual_vec))

    opnorm = spectral_norm(a)
    if opnorm == 0.0:
        return SolverReport(
            solution=np.zeros(n),
            iterations=0,
            residual_norm=float(np.linalg.norm(b)),
            objective=objective(np.zeros(n), -b),
            converged=True,
            method="srlasso",
        )
    tau = sigma = 0.99 / opnorm
    thresholds = tau * lam * w

    z = np.zeros(n)
    az = np.zeros(m)
    az_old = np.zeros(m)
    xi = np.zeros(m)
    best_obj = objective(z, az - b)
    best_z = z
    best_az = az
    iterations = cfg.max_iter
    converged = False
    for k in range(1, cfg.max_iter + 1):
        xi_t = xi + sigma * ((2.0 * az - az_old) - b)
        xi_new = xi_t / max(1.0, np.linalg.norm(xi_t))
        z_new = _soft_threshold(z - tau * (a.T @ xi_new), thresholds)
        az_old = az
        az = a @ z_new

        obj = objective(z_new, az - b)
        if obj < best_obj:
            best_obj, best_z, best_az = obj, z_new, az

        primal_change = np.linalg.norm(z_new - z) / max(np.linalg.norm(z_new), 1.0)
        dual_change = np.linalg.norm(xi_new - xi) / max(np.linalg.norm(xi_new), 1.0)
        z, xi = z_new, xi_new
        if primal_change < cfg.tol and dual_change < cfg.tol:
            iterations = k
            converged = True
            break

    final_obj = objective(z, az - b)
    if final_obj > best_obj + cfg.tol * (1.0 + np.linalg.norm(b)):
        z, az = best_z, best_az
    return SolverReport(
        solution=z,
        iterations=iterations,
        residual_norm=float(np.linalg.norm(az - b)),
        objective=objective(z, az - b),
        converged=converged,
        method="srlasso",
    )
