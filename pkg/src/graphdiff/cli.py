"""Command-line interface: graph generation, ingestion, diffusion, fitting, experiments."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .communities import dump_partition_json, fluid_communities, load_partition_json
from .diffusion import DiffusionProblem, solve_diffusion
from .experiments import (
    _resolve_u0,
    derive_seed,
    load_config,
    run_experiment,
    write_rows_csv,
)
from .graphs import dump_graph_json, generate_sbm, load_graph_json, parse_edge_list, SbmSpec
from .polyspace import BasisKind, build_index_set, intrinsic_weights
from .recovery import SolverConfig
from .report import render_figures
from .surrogate import evaluate, fit_surrogate, load_model, save_model

_FAMILIES = ("total_degree", "hyperbolic_cross")


def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.replace(",", " ").split()])


def _out_path(path: str) -> Path:
    base = os.environ.get("GRAPHDIFF_OUTDIR")
    p = Path(path)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


@click.group()
def main():
    """Sparse polynomial surrogates for parametric diffusion on graphs."""


@main.command("gen-sbm")
@click.option("--sizes", required=True, help="Comma-separated community sizes, e.g. 10,10.")
@click.option("--p-intra", type=float, required=True)
@click.option("--p-inter", type=float, required=True)
@click.option("--edge-weight", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def gen_sbm(sizes, p_intra, p_inter, edge_weight, seed, out_path):
    """Sample a block-model graph and write the canonical graph JSON."""
    spec = SbmSpec(
        community_sizes=tuple(int(s) for s in sizes.split(",")),
        p_intra=p_intra,
        p_inter=p_inter,
        edge_weight=edge_weight,
    )
    graph = generate_sbm(spec, seed=seed)
    target = _out_path(out_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    dump_graph_json(graph, target)
    click.echo(json.dumps({"n_nodes": graph.n_nodes, "edge_count": graph.edge_count, "out": str(target)}))


@main.command("ingest")
@click.argument("edge_list", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--weighted/--unweighted", default=True, show_default=True)
@click.option("--symmetrize", type=click.Choice(["max", "mean", "sum"]), default="mean", show_default=True)
@click.option("--index-base", type=int, default=0, show_default=True)
@click.option("--comment-prefix", default="#", show_default=True)
def ingest(edge_list, out_path, weighted, symmetrize, index_base, comment_prefix):
    """Parse a plain-text edge list into the canonical graph JSON."""
    with open(edge_list, "rb") as fh:
        graph = parse_edge_list(
            fh,
            weighted=weighted,
            symmetrize=symmetrize,
            index_base=index_base,
            comment_prefix=comment_prefix,
        )
    target = _out_path(out_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    dump_graph_json(graph, target)
    click.echo(json.dumps({"n_nodes": graph.n_nodes, "edge_count": graph.edge_count, "out": str(target)}))


@main.command("communities")
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, required=True, help="Number of communities.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--max-iter", type=int, default=100, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
def communities_cmd(graph_file, k, seed, max_iter, out_path):
    """Detect fluid communities; writes/prints JSON {K, assignment, sizes}."""
    graph = load_graph_json(graph_file)
    partition = fluid_communities(graph, k, seed=seed, max_iter=max_iter)
    payload = {"K": partition.n_communities, "assignment": partition.assignment.tolist(), "sizes": partition.sizes.tolist()}
    if out_path:
        target = _out_path(out_path)
        target.parent.mkdir(parents=True, exist_ok=True)
        dump_partition_json(partition, target)
    click.echo(json.dumps(payload))


@main.command("diffuse")
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--partition", "partition_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--y", "y_text", required=True, help="Parameter vector, comma-separated in [-1, 1].")
@click.option("--t", "final_time", type=float, default=1.0, show_default=True)
@click.option("--node", type=int, default=None, help="Report only this node's value (0-based).")
@click.option("--u0", default="e1", show_default=True, help="'e<k>' (1-based unit), 'uniform', or comma-separated values.")
@click.option("--method", type=click.Choice(["auto", "expm", "rk4"]), default="auto", show_default=True)
def diffuse(graph_file, partition_file, y_text, final_time, node, u0, method):
    """Solve the diffusion problem at one parameter point; prints u(T) as JSON."""
    graph = load_graph_json(graph_file)
    partition = load_partition_json(partition_file)
    u0_vec = _resolve_u0(u0 if u0 in ("uniform",) or u0.startswith("e") else tuple(_parse_vector(u0)), graph.n_nodes)
    problem = DiffusionProblem.standard(graph, partition, final_time=final_time, u0=u0_vec)
    y = _parse_vector(y_text)
    state = solve_diffusion(problem, y, method=method)
    if node is not None:
        click.echo(json.dumps({"node": node, "value": float(state[node])}))
    else:
        click.echo(json.dumps({"u": state.tolist(), "mass": float(state.sum())}))


@main.command("basis")
@click.option("--kind", type=click.Choice(["legendre", "chebyshev"]), default="legendre", show_default=True)
@click.option("--family", type=click.Choice(list(_FAMILIES)), default="total_degree", show_default=True)
@click.option("--d", "dimension", type=int, required=True)
@click.option("--n", "order", type=int, required=True)
@click.option("--weights", "show_weights", is_flag=True, help="Also print the intrinsic weights.")
def basis_cmd(kind, family, dimension, order, show_weights):
    """Inspect an index set: cardinality and, optionally, intrinsic weights."""
    index_set = build_index_set(family, dimension, order)
    payload = {"family": family, "d": dimension, "order": order, "cardinality": len(index_set)}
    if show_weights:
        payload["weights"] = intrinsic_weights(kind, index_set).tolist()
    click.echo(json.dumps(payload))


@main.command("fit")
@click.argument("graph_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--partition", "partition_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["ls", "qcbp", "wqcbp", "srlasso", "wsrlasso"]), required=True)
@click.option("--basis", type=click.Choice(["legendre", "chebyshev"]), default="legendre", show_default=True)
@click.option("--family", type=click.Choice(list(_FAMILIES)), default="total_degree", show_default=True)
@click.option("--order", type=int, required=True)
@click.option("--m", "n_samples", type=int, required=True)
@click.option("--node", type=int, default=1, show_default=True, help="Observed node (0-based).")
@click.option("--t", "final_time", type=float, default=1.0, show_default=True)
@click.option("--u0", default="e1", show_default=True)
@click.option("--eta", type=float, default=1e-8, show_default=True, help="Residual budget for qcbp/wqcbp.")
@click.option("--lam", type=float, default=None, help="Penalty for srlasso/wsrlasso (default 1/(8 sqrt(m))).")
@click.option("--max-iter", type=int, default=5000, show_default=True)
@click.option("--tol", type=float, default=1e-8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--model-out", type=click.Path(dir_okay=False), default=None, help="Also save the fitted model JSON.")
def fit_cmd(graph_file, partition_file, method, basis, family, order, n_samples, node, final_time, u0, eta, lam, max_iter, tol, seed, model_out):
    """Fit a surrogate on a graph problem; prints the solver report as JSON."""
    graph = load_graph_json(graph_file)
    partition = load_partition_json(partition_file)
    u0_vec = _resolve_u0(u0 if u0 in ("uniform",) or u0.startswith("e") else tuple(_parse_vector(u0)), graph.n_nodes)
    problem = DiffusionProblem.standard(graph, partition, final_time=final_time, u0=u0_vec)
    index_set = build_index_set(family, problem.dimension, order)
    model = fit_surrogate(
        problem,
        node,
        basis,
        index_set,
        n_samples,
        method,
        seed=seed,
        eta=eta,
        lam=lam,
        config=SolverConfig(max_iter=max_iter, tol=tol),
    )
    if model_out:
        target = _out_path(model_out)
        target.parent.mkdir(parents=True, exist_ok=True)
        save_model(model, target)
    report = dict(model.metadata["solver"])
    report.update({"method": method, "m": n_samples, "cardinality": len(index_set)})
    click.echo(json.dumps(report))


@main.command("evaluate")
@click.argument("model_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("points_file", type=click.Path(exists=True, dir_okay=False))
def evaluate_cmd(model_file, points_file):
    """Evaluate a saved model at points given as a JSON array of vectors."""
    model = load_model(model_file)
    with open(points_file, "r", encoding="utf-8") as fh:
        points = np.asarray(json.load(fh), dtype=float)
    values = evaluate(model, points)
    click.echo(json.dumps({"values": values.tolist()}))


@main.command("experiment")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--figures/--no-figures", default=True, show_default=True, help="Render figures next to the CSV.")
@click.option("--workers", type=int, default=None, help="Cell worker count (default GRAPHDIFF_WORKERS or 1).")
def experiment(config_path, out_path, figures, workers):
    """Run a configured sweep and append rows to a CSV table."""
    cfg = load_config(config_path)
    rows, info = run_experiment(cfg, workers=workers)
    target = _out_path(out_path)
    write_rows_csv(rows, target)
    figure_paths = []
    if figures:
        figure_paths = render_figures(rows, target.with_suffix(""))
    summary = {
        "experiment_id": cfg.experiment_id,
        "rows": len(rows),
        "failed_cells": int(sum(r.get("n_failed", 0) for r in rows)),
        "out": str(target),
        "figures": [str(p) for p in figure_paths],
    }
    summary.update(info)
    click.echo(json.dumps(summary))
    if summary["failed_cells"] > 0:
        sys.exit(1)


if __name__ == "__main__":
    main()
