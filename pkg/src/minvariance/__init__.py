"""Optimal m-invariant clustering of microdata by column generation."""

from .core import (
    Dataset,
    DegenerateDatasetError,
    InfeasibleError,
    InvalidInputError,
    cluster_sse,
    cluster_weight,
    information_loss,
    is_feasible_clustering,
    is_feasible_instance,
    sst,
    total_sse,
)
from .decomp import PipelineParams, PipelineReport, run_pipeline, two_swap
from .colgen import ColGenParams, solve_subset
from .heuristic import initial_clustering
from .oracle import brute_force_optimal

__all__ = [
    "ColGenParams",
    "Dataset",
    "DegenerateDatasetError",
    "InfeasibleError",
    "InvalidInputError",
    "PipelineParams",
    "PipelineReport",
    "brute_force_optimal",
    "cluster_sse",
    "cluster_weight",
    "information_loss",
    "initial_clustering",
    "is_feasible_clustering",
    "is_feasible_instance",
    "run_pipeline",
    "solve_subset",
    "sst",
    "total_sse",
    "two_swap",
]
