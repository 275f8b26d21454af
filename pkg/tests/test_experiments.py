import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphdiff.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    derive_seed,
    geometric_mean,
    geometric_std,
    ingest_dataset,
    load_config,
    run_cardinality_sweep,
    run_dataset_experiment,
    run_dimension_sweep,
    run_m_sweep,
    run_size_sweep,
    write_rows_csv,
)
from graphdiff.graphs import fixture_edge_list_path
from graphdiff.communities import contiguous_partition
from graphdiff.diffusion import DiffusionProblem
from graphdiff.graphs import SbmSpec, generate_sbm
from graphdiff.polyspace import total_degree_set
from graphdiff.surrogate import fit_surrogate, make_test_set, rmse


def _tiny_cfg(**overrides):
    base = dict(
        experiment_id="tiny",
        sweep="m",
        master_seed=7,
        repeats=2,
        community_sizes=(4, 4),
        methods=("qcbp",),
        m_values=(12, 20),
        order=2,
        test_size=40,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestAggregation:
    @given(st.lists(st.floats(1e-12, 1e3), min_size=1, max_size=10))
    @settings(max_examples=80, deadline=None)
    def test_geometric_stats_match_direct_oracle(self, values):
        logs = [math.log(v) for v in values]
        mean_oracle = math.exp(sum(logs) / len(logs))
        centered = [(x - sum(logs) / len(logs)) ** 2 for x in logs]
        std_oracle = math.exp(math.sqrt(sum(centered) / len(logs)))
        assert geometric_mean(values) == pytest.approx(mean_oracle, rel=1e-12)
        assert geometric_std(values) == pytest.approx(std_oracle, rel=1e-12)

    def test_known_values(self):
        assert geometric_mean([1.0, 100.0]) == pytest.approx(10.0)
        assert geometric_std([1.0, 1.0, 1.0]) == pytest.approx(1.0)


class TestSeedDerivation:
    def test_deterministic_and_distinct(self):
        a = derive_seed(1, "train", "ls", 100, 0)
        assert a == derive_seed(1, "train", "ls", 100, 0)
        assert a != derive_seed(1, "train", "ls", 100, 1)
        assert a != derive_seed(2, "train", "ls", 100, 0)
        assert a != derive_seed(1, "train", "qcbp", 100, 0)


class TestConfig:
    def test_rejects_decreasing_m_values(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            _tiny_cfg(m_values=(20, 12))

    def test_rejects_zero_repeats(self):
        with pytest.raises(ValueError, match="repeats"):
            _tiny_cfg(repeats=0)

    def test_rejects_unknown_sweep(self):
        with pytest.raises(ValueError, match="unknown sweep"):
            _tiny_cfg(sweep="bogus")

    def test_dataset_requires_path(self):
        with pytest.raises(ValueError, match="dataset_path"):
            _tiny_cfg(graph_source="dataset")

    def test_load_config_from_toml(self, tmp_path):
        text = """
[experiment]
id = "demo"
sweep = "cardinality"
master_seed = 3
repeats = 4

[graph]
source = "sbm"
community_sizes = [3, 3]
p_intra = 0.9
p_inter = 0.1

[diffusion]
node = 0
final_time = 0.5
u0 = "uniform"

[surrogate]
basis = "chebyshev"
index_family = "hyperbolic_cross"
methods = ["ls", "wqcbp"]
m_values = [64]
eta = 1e-6
test_size = 128

[sweep]
orders = [1, 3, 5]
"""
        path = tmp_path / "demo.toml"
        path.write_text(text)
        cfg = load_config(path)
        assert cfg.experiment_id == "demo"
        assert cfg.sweep == "cardinality"
        assert cfg.repeats == 4
        assert cfg.community_sizes == (3, 3)
        assert cfg.node == 0
        assert cfg.u0 == "uniform"
        assert cfg.basis == "chebyshev"
        assert cfg.methods == ("ls", "wqcbp")
        assert cfg.m_values == (64,)
        assert cfg.orders == (1, 3, 5)
        assert cfg.eta == 1e-6

    def test_shipped_configs_parse(self):
        from pathlib import Path

        config_dir = Path(__file__).resolve().parent.parent / "configs"
        parsed = [load_config(p) for p in sorted(config_dir.glob("*.toml"))]
        assert len(parsed) >= 10


class TestMSweep:
    def test_degenerate_sweep_reproduces_single_cell(self):
        cfg = _tiny_cfg(repeats=1, m_values=(15,))
        rows = run_m_sweep(cfg)
        assert len(rows) == 1
        row = rows[0]
        # rebuild the cell by hand from the derived seeds
        graph = generate_sbm(
            SbmSpec(cfg.community_sizes, cfg.p_intra, cfg.p_inter), seed=derive_seed(cfg.master_seed, "graph")
        )
        problem = DiffusionProblem.standard(graph, contiguous_partition(cfg.community_sizes))
        index_set = total_degree_set(problem.dimension, cfg.order)
        model = fit_surrogate(
            problem,
            cfg.node,
            cfg.basis,
            index_set,
            15,
            "qcbp",
            seed=derive_seed(cfg.master_seed, "train", "qcbp", 15, 0),
            eta=cfg.eta,
            config=cfg.solver_config,
        )
        test = make_test_set(problem, cfg.node, cfg.test_size, derive_seed(cfg.master_seed, "test", 0))
        assert row["rmse_geomean"] == rmse(model, test)

    def test_ls_rows_below_cardinality_are_skipped(self):
        cfg = _tiny_cfg(methods=("ls", "qcbp"), m_values=(6, 30), order=2)  # N = 10
        rows = run_m_sweep(cfg)
        by_key = {(r["method"], r["m"]): r for r in rows}
        assert by_key[("ls", 6)]["skipped"] is True
        assert by_key[("ls", 30)]["skipped"] is False
        assert by_key[("qcbp", 6)]["skipped"] is False

    def test_deterministic_rows(self):
        cfg = _tiny_cfg()

        def strip_runtime(rows):
            return [{k: v for k, v in row.items() if k != "mean_runtime_s"} for row in rows]

        assert strip_runtime(run_m_sweep(cfg)) == strip_runtime(run_m_sweep(cfg))

    def test_failed_cells_counted_not_fatal(self):
        cfg = _tiny_cfg(eta=-1.0, m_values=(12,))  # invalid budget fails inside the cell
        rows = run_m_sweep(cfg)
        assert rows[0]["n_failed"] == cfg.repeats
        assert math.isnan(rows[0]["rmse_geomean"])


class TestOtherSweeps:
    def test_cardinality_sweep(self):
        cfg = _tiny_cfg(sweep="cardinality", methods=("ls",), m_values=(25,), orders=(1, 2))
        rows = run_cardinality_sweep(cfg)
        assert [r["order"] for r in rows] == [1, 2]
        assert all(r["m"] == 25 for r in rows)
        cards = {r["order"]: r["cardinality"] for r in rows}
        assert cards == {1: 4, 2: 10}

    def test_cardinality_sweep_needs_single_m(self):
        cfg = _tiny_cfg(sweep="cardinality", m_values=(10, 20), orders=(1,))
        with pytest.raises(ValueError, match="exactly one"):
            run_cardinality_sweep(cfg)

    def test_dimension_sweep(self):
        cfg = _tiny_cfg(
            sweep="dimension",
            methods=("qcbp",),
            m_values=(15,),
            k_values=(2, 3),
            n_nodes_total=6,
            target_cardinality=12,
        )
        rows = run_dimension_sweep(cfg)
        assert [r["d"] for r in rows] == [3, 6]
        assert all(r["n_nodes"] == 6 for r in rows)

    def test_dimension_sweep_divisibility(self):
        cfg = _tiny_cfg(sweep="dimension", k_values=(2,), n_nodes_total=7)
        with pytest.raises(ValueError, match="equal communities"):
            run_dimension_sweep(cfg)

    def test_dimension_sweep_explicit_orders(self):
        cfg = _tiny_cfg(
            sweep="dimension",
            methods=("qcbp",),
            m_values=(15,),
            k_values=(2,),
            n_nodes_total=6,
            dimension_orders=((2, 3),),
        )
        rows = run_dimension_sweep(cfg)
        assert rows[0]["order"] == 3

    def test_size_sweep(self):
        cfg = _tiny_cfg(
            sweep="size",
            methods=("qcbp",),
            m_values=(15,),
            sizes_per_community=(3, 5),
            n_communities=2,
        )
        rows = run_size_sweep(cfg)
        assert [r["n_nodes"] for r in rows] == [6, 10]


class TestDatasetExperiment:
    def test_fixture_ingestion_and_rows(self):
        cfg = _tiny_cfg(
            sweep="dataset",
            graph_source="dataset",
            dataset_path=str(fixture_edge_list_path()),
            methods=("qcbp",),
            m_values=(10,),
            repeats=2,
            order=2,
            test_size=30,
        )
        rows, info = run_dataset_experiment(cfg)
        assert info["n_nodes"] == 50
        assert info["edge_count"] == 213
        assert len(info["community_sizes"]) == 2
        assert sum(info["community_sizes"]) == 50
        assert len(rows) == 1 and rows[0]["n_failed"] == 0

    def test_missing_file(self):
        cfg = _tiny_cfg(sweep="dataset", graph_source="dataset", dataset_path="no/such/file.txt")
        with pytest.raises(FileNotFoundError):
            ingest_dataset(cfg)


class TestCsvOutput:
    def test_schema_stable_and_append_only(self, tmp_path):
        path = tmp_path / "results.csv"
        cfg_a = _tiny_cfg(repeats=1, m_values=(15,))
        rows_a = run_m_sweep(cfg_a)
        write_rows_csv(rows_a, path)
        cfg_b = _tiny_cfg(sweep="cardinality", methods=("ls",), m_values=(25,), orders=(1,), repeats=1)
        rows_b = run_cardinality_sweep(cfg_b)
        write_rows_csv(rows_b, path)
        with open(path) as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = list(reader)
        assert header == CSV_COLUMNS
        assert len(data) == 2  # appended, single header
        sweeps = {row[header.index("sweep")] for row in data}
        assert sweeps == {"m", "cardinality"}

    def test_worker_pool_matches_serial(self):
        cfg = _tiny_cfg(m_values=(12,))
        serial = run_m_sweep(cfg, workers=1)
        pooled = run_m_sweep(cfg, workers=2)
        assert serial[0]["rmse_geomean"] == pooled[0]["rmse_geomean"]
