"""Sparse polynomial surrogate models for parametric diffusion on graphs."""

from .communities import (
    BlockIndexMap,
    CommunityPartition,
    block_index_map,
    contiguous_partition,
    fluid_communities,
)
from .diffusion import (
    DiffusionProblem,
    DiffusivitySpec,
    TimeProfile,
    assemble_diffusivity,
    assemble_operator,
    solution_map,
    solve_diffusion,
)
from .graphs import SbmSpec, WeightedGraph, generate_sbm, laplacian, parse_edge_list
from .polyspace import (
    BasisKind,
    MultiIndexSet,
    eval_basis,
    hyperbolic_cross_set,
    intrinsic_weights,
    is_lower,
    sample_measure,
    total_degree_set,
)
from .recovery import (
    MeasurementSystem,
    SolverConfig,
    SolverReport,
    build_system,
    solve_least_squares,
    solve_qcbp,
    solve_srlasso,
)
from .surrogate import SurrogateModel, TestSet, best_s_term_error, evaluate, fit_surrogate, rmse

__version__ = "0.1.0"
