"""Decomposition pipeline: initial clustering, subsets, per-subset column generation, two-swap."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .colgen import ColGenParams, ColGenResult, solve_subset
from .core import (
    Clustering,
    Dataset,
    DegenerateDatasetError,
    InfeasibleError,
    InvalidInputError,
    information_loss,
    is_feasible_clustering,
    make_cluster,
    pairwise_sq_distances,
    total_sse,
)
from .heuristic import initial_clustering

logger = logging.getLogger(__name__)

SWAP_TOL = 1e-9


@dataclass(frozen=True)
class SubsetPartition:
    subsets: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.subsets)


def partition_points(initial: Clustering, s: int, ds: Dataset) -> SubsetPartition:
    """Group whole clusters into ``s`` subsets of contiguous centroid order.

    Clusters are sorted lexicographically by centroid and dealt out in runs
    whose lengths differ by at most one.
    """
    if not 1 <= s <= len(initial):
        raise InvalidInputError(f"s must lie in 1..{len(initial)}, got {s}")
    cents = np.array([ds.X[list(C)].mean(axis=0) for C in initial])
    order = np.lexsort(cents.T[::-1]) if len(initial) else np.array([], dtype=int)
    subsets = []
    for chunk in np.array_split(order, s):
        subsets.append(tuple(sorted(i for k in chunk for i in initial[k])))
    return SubsetPartition(tuple(subsets))


def _swap_gains(X, labels, D, colors, n_clusters):
    sizes = np.bincount(labels, minlength=n_clusters).astype(float)
    cents = np.zeros((n_clusters, X.shape[1]))
    np.add.at(cents, labels, X)
    cents /= sizes[:, None]
    # E[j, k]: squared distance from point j to centroid of cluster k
    diff = X[:, None, :] - cents[None, :, :]
    E = np.einsum("jkd,jkd->jk", diff, diff)
    G = E[:, labels]  # G[j, i] = E[j, label(i)]
    own = np.diag(G).copy()
    inv = 1.0 / sizes[labels]
    delta = G.T - own[:, None] + G - own[None, :] - D * (inv[:, None] + inv[None, :])

    present = np.zeros((colors.max() + 1, n_clusters), dtype=bool)
    present[colors, labels] = True
    same_color = colors[:, None] == colors[None, :]
    # i may enter j's cluster if its color is absent there, or only held by j itself
    ok_i = ~present[colors][:, labels] | same_color
    feasible = ok_i & ok_i.T & (labels[:, None] != labels[None, :])
    return delta, feasible


def two_swap(K: Clustering, ds: Dataset, m: int, max_iterations: int | None = None) -> Clustering:
    """Best-improvement exchange of two points between clusters until no swap lowers SSE.

    A swap of ``i`` (in ``C_i``) and ``j`` (in ``C_j``) is allowed when ``i``'s color
    does not occur in ``C_j`` apart from ``j`` and vice versa.
    """
    if not is_feasible_clustering(K, ds, m):
        raise InvalidInputError("two_swap needs a feasible clustering")
    labels = np.empty(ds.p, dtype=np.int64)
    for k, C in enumerate(K):
        labels[list(C)] = k
    D = pairwise_sq_distances(ds.X)
    iu = np.triu_indices(ds.p, k=1)
    n_iter = 0
    while max_iterations is None or n_iter < max_iterations:
        delta, feasible = _swap_gains(ds.X, labels, D, ds.colors, len(K))
        gains = np.where(feasible, delta, np.inf)[iu]
        if gains.size == 0:
            break
        best = int(np.argmin(gains))  # row-major order: ties go to the smallest (i, j)
        if not gains[best] < -SWAP_TOL:
            break
        i, j = int(iu[0][best]), int(iu[1][best])
        labels[i], labels[j] = labels[j], labels[i]
        n_iter += 1
    out: list[list[int]] = [[] for _ in K]
    for i, k in enumerate(labels):
        out[k].append(i)
    return [make_cluster(C) for C in out]


@dataclass
class StageRecord:
    stage: str
    wall_time: float
    il: float
    sse: float


@dataclass
class PipelineReport:
    m: int
    s: int
    seed: int | None
    stages: list[StageRecord] = field(default_factory=list)
    subsets: list[ColGenResult] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def stage(self, name: str) -> StageRecord:
        for rec in self.stages:
            if rec.stage == name:
                return rec
        raise KeyError(name)

    @property
    def lp_bound(self) -> float:
        """Sum of subset LP bounds; a global bound only when s == 1 (it bounds the colgen stage otherwise)."""
        return float(sum(r.lp_bound for r in self.subsets))

    @property
    def lp_optimal(self) -> bool:
        return all(r.lp_optimal for r in self.subsets)

    def il_sequence(self) -> list[float]:
        return [rec.il for rec in self.stages]


@dataclass(frozen=True)
class PipelineParams:
    pre_swap: bool = True
    final_swap: bool = True
    colgen: ColGenParams = ColGenParams()
    workers: int | None = None


def _solve_one(args):
    pts, ds, m, seed, params = args
    return solve_subset(pts, ds, m, seed, params)


def run_pipeline(
    ds: Dataset,
    m: int,
    s: int = 1,
    params: PipelineParams = PipelineParams(),
    seed: int | None = None,
) -> tuple[Clustering, PipelineReport]:
    """Heuristic, optional pre-swap, subsets, column generation per subset, union, final swap.

    ``seed`` is recorded in the report only; the pipeline itself is deterministic.
    Stages are reported with wall-clock time and information loss.
    """
    report = PipelineReport(m=m, s=s, seed=seed, params=asdict(params))

    def record(name: str, t0: float, K: Clustering) -> None:
        sse = total_sse(K, ds)
        try:
            il = information_loss(K, ds)
        except DegenerateDatasetError:
            il = float("nan")
        report.stages.append(StageRecord(name, time.perf_counter() - t0, il, sse))

    t0 = time.perf_counter()
    try:
        K = initial_clustering(ds, m)
    except InfeasibleError as exc:
        raise InfeasibleError(f"heuristic stage: {exc}") from exc
    record("heuristic", t0, K)

    if params.pre_swap:
        t0 = time.perf_counter()
        K = two_swap(K, ds, m)
        record("pre_swap", t0, K)

    t0 = time.perf_counter()
    part = partition_points(K, s, ds)
    seeds = []
    for sub in part.subsets:
        members = set(sub)
        seeds.append([C for C in K if C[0] in members])
    jobs = [(sub, ds, m, sd, params.colgen) for sub, sd in zip(part.subsets, seeds)]
    workers = params.workers or min(s, os.cpu_count() or 1)
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_one, jobs))
    else:
        results = [_solve_one(job) for job in jobs]
    report.subsets = results
    K = [C for res in results for C in res.clustering]
    if not is_feasible_clustering(K, ds, m):
        raise InfeasibleError("merged subset clusterings are not a feasible clustering")
    record("colgen", t0, K)

    if params.final_swap:
        t0 = time.perf_counter()
        K = two_swap(K, ds, m)
        record("final_swap", t0, K)

    logger.info("pipeline m=%d s=%d IL: %s", m, s, " -> ".join(f"{x:.2f}" for x in report.il_sequence()))
    return K, report
