"""Experiment orchestration: protocol sweeps, aggregation, and CSV output.

Every sweep produces rows with one fixed schema, aggregated over repeated
randomized runs by the geometric mean and geometric standard deviation of
the RMSE. Per-cell seeds are a pure function of the master seed and the
cell key, so any single cell can be reproduced in isolation.
"""

from __future__ import annotations

import csv
import hashlib
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .communities import contiguous_partition, fluid_communities
from .diffusion import DiffusionProblem
from .graphs import SbmSpec, WeightedGraph, generate_sbm, parse_edge_list
from .polyspace import BasisKind, build_index_set, closest_order
from .recovery import SolverConfig
from .surrogate import TestSet, fit_surrogate, make_test_set, rmse

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "CSV_COLUMNS",
    "derive_seed",
    "geometric_mean",
    "geometric_std",
    "load_config",
    "run_experiment",
    "run_m_sweep",
    "run_cardinality_sweep",
    "run_dimension_sweep",
    "run_size_sweep",
    "run_dataset_experiment",
    "write_rows_csv",
]

CSV_COLUMNS = [
    "experiment_id",
    "sweep",
    "method",
    "basis",
    "index_family",
    "order",
    "cardinality",
    "d",
    "n_nodes",
    "m",
    "repeats",
    "n_failed",
    "skipped",
    "rmse_geomean",
    "rmse_geostd",
    "mean_runtime_s",
]

SWEEPS = ("m", "cardinality", "dimension", "size", "dataset")


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 64-bit seed derived from the master seed and a cell key."""
    digest = hashlib.blake2b(repr((int(master_seed),) + parts).encode(), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


def geometric_mean(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 1:
        return float(values[0])  # exact; exp(log(x)) can lose an ulp
    with np.errstate(divide="ignore"):
        return float(np.exp(np.mean(np.log(values))))


def geometric_std(values) -> float:
    """exp of the (population) standard deviation of the log values."""
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.exp(np.std(np.log(values))))


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one (method, m, repeat) cell."""

    method: str
    m: int
    repeat: int
    rmse: float
    runtime_s: float
    iterations: int
    converged: bool
    failed: bool = False
    error: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    sweep: str
    master_seed: int = 0
    repeats: int = 20

    # graph source
    graph_source: str = "sbm"  # "sbm" | "dataset"
    community_sizes: tuple[int, ...] = (10, 10)
    p_intra: float = 1.0
    p_inter: float = 0.04
    edge_weight: float = 1.0
    dataset_path: str | None = None
    detect_communities: int = 2
    dataset_weighted: bool = True
    symmetrize: str = "mean"
    detection_max_iter: int = 100

    # diffusion
    node: int = 1
    final_time: float = 1.0
    u0: str | tuple[float, ...] = "e1"

    # surrogate
    basis: str = "legendre"
    index_family: str = "total_degree"
    order: int = 8
    methods: tuple[str, ...] = ("ls", "qcbp", "wqcbp")
    m_values: tuple[int, ...] = (100, 200, 500)
    test_size: int = 1000
    eta: float = 1e-8
    lam: float | None = None
    max_iter: int = 5000
    tol: float = 1e-8

    # sweep-specific knobs
    orders: tuple[int, ...] = ()
    k_values: tuple[int, ...] = ()
    n_nodes_total: int = 24
    target_cardinality: int = 3000
    dimension_orders: tuple[tuple[int, int], ...] = ()  # (K, order) pairs
    sizes_per_community: tuple[int, ...] = ()
    n_communities: int = 2

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ValueError(f"unknown sweep {self.sweep!r}; expected one of {SWEEPS}")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        for name, seq in (("m_values", self.m_values), ("orders", self.orders)):
            seq = tuple(seq)
            if seq and (any(v < 1 for v in seq) or any(b <= a for a, b in zip(seq, seq[1:]))):
                raise ValueError(f"{name} must be positive and strictly increasing")
        if self.graph_source not in ("sbm", "dataset"):
            raise ValueError("graph_source must be 'sbm' or 'dataset'")
        if self.graph_source == "dataset" and not self.dataset_path:
            raise ValueError("dataset experiments need a dataset_path")

    @property
    def solver_config(self) -> SolverConfig:
        return SolverConfig(max_iter=self.max_iter, tol=self.tol)


def _resolve_u0(spec, n: int) -> np.ndarray:
    """Initial condition from a spec: 'e<k>' (1-based unit), 'uniform', or a vector."""
    if isinstance(spec, str):
        if spec == "uniform":
            return np.full(n, 1.0 / n)
        if spec.startswith("e"):
            k = int(spec[1:])
            if not 1 <= k <= n:
                raise ValueError(f"u0 unit index {k} out of range 1..{n}")
            u0 = np.zeros(n)
            u0[k - 1] = 1.0
            return u0
        raise ValueError(f"unknown u0 spec {spec!r}")
    u0 = np.asarray(tuple(spec), dtype=float)
    if u0.shape != (n,):
        raise ValueError(f"u0 vector must have length {n}")
    return u0


def load_config(path) -> ExperimentConfig:
    """Read an experiment config from a TOML file with nested sections."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    exp = raw.get("experiment", {})
    graph = raw.get("graph", {})
    diffusion = raw.get("diffusion", {})
    surrogate = raw.get("surrogate", {})
    sweep = raw.get("sweep", {})

    kwargs = {
        "experiment_id": exp.get("id", Path(path).stem),
        "sweep": exp.get("sweep", "m"),
        "master_seed": int(exp.get("master_seed", 0)),
        "repeats": int(exp.get("repeats", 20)),
    }
    if graph:
        kwargs["graph_source"] = graph.get("source", "sbm")
        if "community_sizes" in graph:
            kwargs["community_sizes"] = tuple(int(s) for s in graph["community_sizes"])
        for key in ("p_intra", "p_inter", "edge_weight"):
            if key in graph:
                kwargs[key] = float(graph[key])
        if "path" in graph:
            kwargs["dataset_path"] = str(graph["path"])
        if "detect_communities" in graph:
            kwargs["detect_communities"] = int(graph["detect_communities"])
        if "weighted" in graph:
            kwargs["dataset_weighted"] = bool(graph["weighted"])
        if "symmetrize" in graph:
            kwargs["symmetrize"] = str(graph["symmetrize"])
    if diffusion:
        if "node" in diffusion:
            kwargs["node"] = int(diffusion["node"])
        if "final_time" in diffusion:
            kwargs["final_time"] = float(diffusion["final_time"])
        if "u0" in diffusion:
            u0 = diffusion["u0"]
            kwargs["u0"] = u0 if isinstance(u0, str) else tuple(float(v) for v in u0)
    if surrogate:
        for key in ("basis", "index_family"):
            if key in surrogate:
                kwargs[key] = str(surrogate[key])
        if "order" in surrogate:
            kwargs["order"] = int(surrogate["order"])
        if "methods" in surrogate:
            kwargs["methods"] = tuple(str(m) for m in surrogate["methods"])
        if "m_values" in surrogate:
            kwargs["m_values"] = tuple(int(m) for m in surrogate["m_values"])
        for key in ("eta", "tol"):
            if key in surrogate:
                kwargs[key] = float(surrogate[key])
        if "lam" in surrogate:
            kwargs["lam"] = float(surrogate["lam"])
        if "test_size" in surrogate:
            kwargs["test_size"] = int(surrogate["test_size"])
        if "max_iter" in surrogate:
            kwargs["max_iter"] = int(surrogate["max_iter"])
    if sweep:
        if "orders" in sweep:
            kwargs["orders"] = tuple(int(n) for n in sweep["orders"])
        if "k_values" in sweep:
            kwargs["k_values"] = tuple(int(k) for k in sweep["k_values"])
        if "n_nodes_total" in sweep:
            kwargs["n_nodes_total"] = int(sweep["n_nodes_total"])
        if "target_cardinality" in sweep:
            kwargs["target_cardinality"] = int(sweep["target_cardinality"])
        if "dimension_orders" in sweep:
            kwargs["dimension_orders"] = tuple(
                (int(k), int(n)) for k, n in sweep["dimension_orders"].items()
            )
        if "sizes_per_community" in sweep:
            kwargs["sizes_per_community"] = tuple(int(s) for s in sweep["sizes_per_community"])
        if "n_communities" in sweep:
            kwargs["n_communities"] = int(sweep["n_communities"])
    return ExperimentConfig(**kwargs)


def _sbm_problem(cfg: ExperimentConfig, sizes, graph_seed) -> DiffusionProblem:
    spec = SbmSpec(
        community_sizes=tuple(sizes),
        p_intra=cfg.p_intra,
        p_inter=cfg.p_inter,
        edge_weight=cfg.edge_weight,
    )
    graph = generate_sbm(spec, seed=graph_seed)
    partition = contiguous_partition(sizes)
    u0 = _resolve_u0(cfg.u0, graph.n_nodes)
    return DiffusionProblem.standard(graph, partition, final_time=cfg.final_time, u0=u0)


def ingest_dataset(cfg: ExperimentConfig) -> tuple[WeightedGraph, "DiffusionProblem"]:
    """Parse the dataset file, detect communities, and build the problem."""
    path = Path(cfg.dataset_path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with open(path, "rb") as fh:
        graph = parse_edge_list(fh, weighted=cfg.dataset_weighted, symmetrize=cfg.symmetrize)
    partition = fluid_communities(
        graph,
        cfg.detect_communities,
        seed=derive_seed(cfg.master_seed, "communities"),
        max_iter=cfg.detection_max_iter,
    )
    u0 = _resolve_u0(cfg.u0, graph.n_nodes)
    problem = DiffusionProblem.standard(graph, partition, final_time=cfg.final_time, u0=u0)
    return graph, problem


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("GRAPHDIFF_WORKERS")
    return max(1, int(env)) if env else 1


def _evaluate_cell(payload: dict) -> RunRecord:
    """Run one cell; failures are captured, never propagated."""
    start = time.perf_counter()
    try:
        model = fit_surrogate(
            payload["problem"],
            payload["node"],
            payload["basis"],
            payload["index_set"],
            payload["m"],
            payload["method"],
            seed=payload["train_seed"],
            eta=payload["eta"],
            lam=payload["lam"],
            config=payload["solver_config"],
        )
        test = TestSet(points=payload["test_points"], values=payload["test_values"])
        score = rmse(model, test)
        solver = model.metadata["solver"]
        return RunRecord(
            method=payload["method"],
            m=payload["m"],
            repeat=payload["repeat"],
            rmse=score,
            runtime_s=time.perf_counter() - start,
            iterations=int(solver["iterations"]),
            converged=bool(solver["converged"]),
        )
    except Exception as exc:  # noqa: BLE001 - a failed cell must not kill the sweep
        return RunRecord(
            method=payload["method"],
            m=payload["m"],
            repeat=payload["repeat"],
            rmse=float("nan"),
            runtime_s=time.perf_counter() - start,
            iterations=0,
            converged=False,
            failed=True,
            error=f"{type(exc).__name__}: {exc}",
        )


def _run_cells(payloads: list[dict], workers: int | None) -> list[RunRecord]:
    count = _worker_count(workers)
    if count == 1 or len(payloads) <= 1:
        return [_evaluate_cell(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=count) as pool:
        records = list(pool.map(_evaluate_cell, payloads))
    # merge order is the payload order, independent of scheduling
    return records


def _aggregate_row(cfg: ExperimentConfig, records: list[RunRecord], **fields) -> dict:
    good = [r.rmse for r in records if not r.failed]
    n_failed = sum(r.failed for r in records)
    row = {
        "experiment_id": cfg.experiment_id,
        "sweep": cfg.sweep,
        "basis": cfg.basis,
        "index_family": cfg.index_family,
        "repeats": cfg.repeats,
        "n_failed": n_failed,
        "skipped": False,
        "rmse_geomean": geometric_mean(good) if good else float("nan"),
        "rmse_geostd": geometric_std(good) if good else float("nan"),
        "mean_runtime_s": float(np.mean([r.runtime_s for r in records])) if records else float("nan"),
    }
    row.update(fields)
    return row


def _skipped_row(cfg: ExperimentConfig, **fields) -> dict:
    row = {
        "experiment_id": cfg.experiment_id,
        "sweep": cfg.sweep,
        "basis": cfg.basis,
        "index_family": cfg.index_family,
        "repeats": cfg.repeats,
        "n_failed": 0,
        "skipped": True,
        "rmse_geomean": float("nan"),
        "rmse_geostd": float("nan"),
        "mean_runtime_s": 0.0,
    }
    row.update(fields)
    return row


def _group_payloads(
    cfg: ExperimentConfig,
    problem: DiffusionProblem,
    index_set,
    method: str,
    m: int,
    test_sets: list[TestSet],
    seed_parts: tuple = (),
) -> list[dict]:
    payloads = []
    for repeat in range(cfg.repeats):
        payloads.append(
            {
                "problem": problem,
                "node": cfg.node,
                "basis": cfg.basis,
                "index_set": index_set,
                "m": m,
                "method": method,
                "repeat": repeat,
                "train_seed": derive_seed(cfg.master_seed, "train", method, m, repeat, *seed_parts),
                "eta": cfg.eta,
                "lam": cfg.lam,
                "solver_config": cfg.solver_config,
                "test_points": test_sets[repeat].points,
                "test_values": test_sets[repeat].values,
            }
        )
    return payloads


def _test_sets(cfg: ExperimentConfig, problem: DiffusionProblem, seed_parts: tuple = ()) -> list[TestSet]:
    return [
        make_test_set(problem, cfg.node, cfg.test_size, derive_seed(cfg.master_seed, "test", rep, *seed_parts))
        for rep in range(cfg.repeats)
    ]


def run_m_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """RMSE against the training sample count, for each method."""
    problem = _sbm_problem(cfg, cfg.community_sizes, derive_seed(cfg.master_seed, "graph"))
    index_set = build_index_set(cfg.index_family, problem.dimension, cfg.order)
    test_sets = _test_sets(cfg, problem)
    common = {
        "order": cfg.order,
        "cardinality": len(index_set),
        "d": problem.dimension,
        "n_nodes": problem.graph.n_nodes,
    }
    rows = []
    for method in cfg.methods:
        for m in cfg.m_values:
            if method == "ls" and m < len(index_set):
                rows.append(_skipped_row(cfg, method=method, m=m, **common))
                continue
            records = _run_cells(_group_payloads(cfg, problem, index_set, method, m, test_sets), workers)
            rows.append(_aggregate_row(cfg, records, method=method, m=m, **common))
    return rows


def run_cardinality_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """RMSE against the index-set order at a fixed sample count."""
    if len(cfg.m_values) != 1:
        raise ValueError("cardinality sweep requires exactly one entry in m_values")
    if not cfg.orders:
        raise ValueError("cardinality sweep requires a list of orders")
    m = cfg.m_values[0]
    problem = _sbm_problem(cfg, cfg.community_sizes, derive_seed(cfg.master_seed, "graph"))
    test_sets = _test_sets(cfg, problem)
    rows = []
    for order in cfg.orders:
        index_set = build_index_set(cfg.index_family, problem.dimension, order)
        common = {
            "order": order,
            "cardinality": len(index_set),
            "d": problem.dimension,
            "n_nodes": problem.graph.n_nodes,
            "m": m,
        }
        for method in cfg.methods:
            if method == "ls" and m < len(index_set):
                rows.append(_skipped_row(cfg, method=method, **common))
                continue
            records = _run_cells(
                _group_payloads(cfg, problem, index_set, method, m, test_sets, seed_parts=(order,)),
                workers,
            )
            rows.append(_aggregate_row(cfg, records, method=method, **common))
    return rows


def run_dimension_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """RMSE against m for several community counts on a fixed-size graph.

    Orders per community count come from explicit (K, order) pairs when
    given, else from a search for the order whose cardinality is closest
    to ``target_cardinality``.
    """
    if not cfg.k_values:
        raise ValueError("dimension sweep requires k_values")
    explicit = dict(cfg.dimension_orders)
    rows = []
    for k in cfg.k_values:
        if cfg.n_nodes_total % k != 0:
            raise ValueError(f"{cfg.n_nodes_total} nodes cannot be split into {k} equal communities")
        sizes = [cfg.n_nodes_total // k] * k
        problem = _sbm_problem(cfg, sizes, derive_seed(cfg.master_seed, "graph", k))
        d = problem.dimension
        order = explicit.get(k, None)
        if order is None:
            order = closest_order(cfg.index_family, d, cfg.target_cardinality)
        index_set = build_index_set(cfg.index_family, d, order)
        test_sets = _test_sets(cfg, problem, seed_parts=(k,))
        common = {
            "order": order,
            "cardinality": len(index_set),
            "d": d,
            "n_nodes": problem.graph.n_nodes,
        }
        for method in cfg.methods:
            for m in cfg.m_values:
                if method == "ls" and m < len(index_set):
                    rows.append(_skipped_row(cfg, method=method, m=m, **common))
                    continue
                records = _run_cells(
                    _group_payloads(cfg, problem, index_set, method, m, test_sets, seed_parts=(k,)),
                    workers,
                )
                rows.append(_aggregate_row(cfg, records, method=method, m=m, **common))
    return rows


def run_size_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """RMSE against m for growing numbers of nodes per community."""
    if not cfg.sizes_per_community:
        raise ValueError("size sweep requires sizes_per_community")
    rows = []
    for size in cfg.sizes_per_community:
        sizes = [size] * cfg.n_communities
        problem = _sbm_problem(cfg, sizes, derive_seed(cfg.master_seed, "graph", size))
        index_set = build_index_set(cfg.index_family, problem.dimension, cfg.order)
        test_sets = _test_sets(cfg, problem, seed_parts=(size,))
        common = {
            "order": cfg.order,
            "cardinality": len(index_set),
            "d": problem.dimension,
            "n_nodes": problem.graph.n_nodes,
        }
        for method in cfg.methods:
            for m in cfg.m_values:
                if method == "ls" and m < len(index_set):
                    rows.append(_skipped_row(cfg, method=method, m=m, **common))
                    continue
                records = _run_cells(
                    _group_payloads(cfg, problem, index_set, method, m, test_sets, seed_parts=(size,)),
                    workers,
                )
                rows.append(_aggregate_row(cfg, records, method=method, m=m, **common))
    return rows


def run_dataset_experiment(cfg: ExperimentConfig, workers: int | None = None) -> tuple[list[dict], dict]:
    """Ingest a dataset, detect communities, and sweep over m.

    Returns the result rows and an info dict with the ingested node/edge
    counts and detected community sizes.
    """
    graph, problem = ingest_dataset(cfg)
    info = {
        "n_nodes": graph.n_nodes,
        "edge_count": graph.edge_count,
        "community_sizes": sorted(problem.diffusivity.partition.sizes.tolist()),
    }
    index_set = build_index_set(cfg.index_family, problem.dimension, cfg.order)
    test_sets = _test_sets(cfg, problem)
    common = {
        "order": cfg.order,
        "cardinality": len(index_set),
        "d": problem.dimension,
        "n_nodes": graph.n_nodes,
    }
    rows = []
    for method in cfg.methods:
        for m in cfg.m_values:
            if method == "ls" and m < len(index_set):
                rows.append(_skipped_row(cfg, method=method, m=m, **common))
                continue
            records = _run_cells(_group_payloads(cfg, problem, index_set, method, m, test_sets), workers)
            rows.append(_aggregate_row(cfg, records, method=method, m=m, **common))
    return rows, info


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> tuple[list[dict], dict]:
    """Dispatch on the configured sweep type; returns (rows, info)."""
    if cfg.sweep == "m":
        return run_m_sweep(cfg, workers), {}
    if cfg.sweep == "cardinality":
        return run_cardinality_sweep(cfg, workers), {}
    if cfg.sweep == "dimension":
        return run_dimension_sweep(cfg, workers), {}
    if cfg.sweep == "size":
        return run_size_sweep(cfg, workers), {}
    return run_dataset_experiment(cfg, workers)


def write_rows_csv(rows: list[dict], path) -> None:
    """Append rows to the CSV, writing the header only for a new file."""
    path = Path(path)
    exists = path.exists() and path.stat().st_size > 0
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if not exists:
            writer.writeheader()
        for row in rows:
            writer.writerow({key: row.get(key, "") for key in CSV_COLUMNS})
