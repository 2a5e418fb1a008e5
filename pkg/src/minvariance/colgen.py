"""Column generation for one subset of points, followed by integer rounding."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import Cluster, Clustering, Dataset, InfeasibleError, is_feasible_cluster
from .heuristic import initial_clustering
from .lp import Column, RestrictedMaster, solve_restricted_master_binary
from .pricing import DEFAULT_NODE_CAP, NEGATIVE_RC, PricingInstance, enumerate_columns, price_all_sizes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColGenParams:
    time_limit: float = 600.0
    node_cap: int = DEFAULT_NODE_CAP
    max_iterations: int | None = None
    rounding_time_limit: float = 60.0
    columns_per_iteration: int = 1
    enumeration_limit: int = 2000
    dive: bool = True
    dive_iterations: int | None = None
    dive_lookahead: int = 3
    dive_exact_size: int = 20


@dataclass
class ColGenResult:
    clustering: Clustering
    sse: float
    lp_bound: float
    columns_generated: int
    iterations: int
    wall_time: float
    lp_optimal: bool
    rounding_optimal: bool
    seed_sse: float
    points: tuple[int, ...] = ()
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_columns: int = 0
    cg_time: float = 0.0


def _weight(cluster: Sequence[int], D: np.ndarray, row_of: dict[int, int]) -> float:
    loc = [row_of[i] for i in cluster]
    return float(D[np.ix_(loc, loc)].sum() / (2 * len(loc)))


def seed_columns(seed: Clustering, ds: Dataset, m: int) -> list[Cluster]:
    """Seed clusters plus every feasible size-``m`` sub-cluster of the larger ones."""
    out: list[Cluster] = []
    for C in seed:
        out.append(tuple(C))
        if len(C) > m:
            out.extend(sub for sub in itertools.combinations(C, m) if is_feasible_cluster(sub, ds, m))
    return out


class _Pool:
    """Master LP over a fixed row set, fed from pricing; weights come from ``ds``."""

    def __init__(self, points: Sequence[int], ds: Dataset, m: int):
        self.pts = tuple(sorted(int(i) for i in points))
        self.row_of = {i: k for k, i in enumerate(self.pts)}
        self.inst = PricingInstance.build(ds, self.pts, m)
        self.D = np.where(np.isfinite(self.inst.D), self.inst.D, 0.0)
        self.master = RestrictedMaster(len(self.pts))
        self.clusters: list[Cluster] = []

    def weight(self, cluster: Sequence[int]) -> float:
        return _weight(cluster, self.D, self.row_of)

    def add(self, cluster: Cluster, weight: float | None = None) -> bool:
        local = tuple(self.row_of[i] for i in cluster)
        if local in self.master:
            return False
        self.master.add_column(Column(local, self.weight(cluster) if weight is None else weight))
        self.clusters.append(tuple(cluster))
        return True

    def index(self, cluster: Cluster) -> int:
        return self.master.index(tuple(self.row_of[i] for i in cluster))

    def generate(self, params: ColGenParams, deadline: float, max_iterations: int | None):
        """Price and re-solve until no improving column is found; returns (solution, optimal, iterations)."""
        iterations = 0
        prev_obj = np.inf
        sol = self.master.solve()
        while True:
            if sol.objective > prev_obj + 1e-7 * (1 + abs(prev_obj)):
                logger.warning("master objective increased: %.9g -> %.9g", prev_obj, sol.objective)
            prev_obj = sol.objective
            if max_iterations is not None and iterations >= max_iterations:
                return sol, False, iterations
            if time.perf_counter() > deadline:
                return sol, False, iterations
            outcome = price_all_sizes(self.inst.with_duals(sol.duals), node_cap=params.node_cap)
            iterations += 1
            if outcome.column is None:
                return sol, outcome.exact, iterations
            candidates = [outcome.column]
            if params.columns_per_iteration > 1:
                extra = sorted(
                    (c for c in outcome.per_size.values() if c.reduced_cost < NEGATIVE_RC and c is not outcome.column),
                    key=lambda c: c.reduced_cost,
                )
                candidates += extra[: params.columns_per_iteration - 1]
            if not any([self.add(c.cluster) for c in candidates]):
                logger.warning("pricing returned a column already in the master; stopping")
                return sol, False, iterations
            sol = self.master.solve()


def _residual_feasible(colors: np.ndarray, m: int) -> bool:
    return colors.size == 0 or int(np.bincount(colors).max()) * m <= colors.size


def dive(
    points: Sequence[int],
    ds: Dataset,
    m: int,
    pool: dict[Cluster, float],
    params: ColGenParams,
    deadline: float,
) -> Clustering:
    """Primal heuristic: fix LP columns one step at a time, re-running column generation on the rest.

    Columns at value one are fixed outright. Otherwise the ``dive_lookahead``
    heaviest fractional columns are tried and the one with the smallest
    weight plus residual LP bound is kept. A column is only fixed if the
    remaining points stay color-feasible, so the dive always completes; when
    time runs out the remainder is covered by the greedy heuristic. New
    columns are added to ``pool``.
    """
    cache: dict[frozenset, tuple] = {}

    def relax(rest: frozenset):
        if rest not in cache:
            order = sorted(rest)
            sub = _Pool(order, ds, m)
            for C in initial_clustering(ds, m, points=order):
                sub.add(C)
            for C, w in pool.items():
                if rest.issuperset(C):
                    sub.add(C, w)
            sol, _, _ = sub.generate(params, deadline, params.dive_iterations)
            for C in sub.clusters:
                pool.setdefault(C, sub.weight(C))
            cache[rest] = (sub, sol)
        return cache[rest]

    def feasible_without(rest: frozenset, C: Cluster) -> bool:
        left = np.fromiter(rest.difference(C), dtype=np.int64)
        return _residual_feasible(ds.colors[left], m)

    remaining = frozenset(int(i) for i in points)
    chosen: Clustering = []
    while remaining:
        if time.perf_counter() > deadline:
            chosen.extend(initial_clustering(ds, m, points=sorted(remaining)))
            break
        if len(remaining) <= params.dive_exact_size:
            tail = replace(params, dive=False, time_limit=max(0.0, deadline - time.perf_counter()))
            order = sorted(remaining)
            chosen.extend(solve_subset(order, ds, m, initial_clustering(ds, m, points=order), tail).clustering)
            break
        sub, sol = relax(remaining)
        x = sol.primal
        ones = [sub.clusters[j] for j in np.flatnonzero(x >= 1 - 1e-6)]
        ones = [C for C in ones if feasible_without(remaining, C)]
        if ones:
            for C in ones:
                chosen.append(C)
                remaining = remaining.difference(C)
            continue
        weights = np.array([c.weight for c in sub.master.columns])
        rc = weights - np.array([sol.duals[list(c.cluster)].sum() for c in sub.master.columns])
        # heaviest LP columns first; zero-valued columns by reduced cost as a fallback
        candidates = [j for j in np.lexsort((rc, -x)) if feasible_without(remaining, sub.clusters[j])]
        candidates = candidates[: max(1, params.dive_lookahead)]
        scores = []
        for j in candidates:
            rest = remaining.difference(sub.clusters[j])
            scores.append(weights[j] + (relax(rest)[1].objective if rest else 0.0))
        j = candidates[int(np.argmin(scores))]
        chosen.append(sub.clusters[j])
        remaining = remaining.difference(sub.clusters[j])
        logger.debug("dive: %d left, bound %.6g", len(remaining), sum(pool[C] for C in chosen) + min(scores) - weights[j])
    return chosen


def solve_subset(
    points: Sequence[int],
    ds: Dataset,
    m: int,
    seed: Clustering,
    params: ColGenParams = ColGenParams(),
) -> ColGenResult:
    """Column generation on ``points`` (global indices), seeded by ``seed``.

    ``seed`` must be a feasible clustering of exactly ``points``. After the LP
    converges, a dive and a branch and bound over the generated columns look
    for a good integer solution; the result is never worse than the seed.
    """
    start = time.perf_counter()
    deadline = start + params.time_limit
    pool = _Pool(points, ds, m)
    pts = pool.pts
    covered = sorted(i for C in seed for i in C)
    if covered != list(pts) or not all(is_feasible_cluster(C, ds, m) for C in seed):
        raise InfeasibleError("seed is not a feasible clustering of the subset")

    for C in seed_columns(seed, ds, m):
        pool.add(C)
    n_seed = len(pool.clusters)
    seed_sse = float(sum(pool.weight(C) for C in seed))

    sol, lp_optimal, iterations = pool.generate(params, deadline, params.max_iterations)
    lp_bound = sol.objective
    duals = sol.duals
    cg_time = time.perf_counter() - start

    best = [tuple(C) for C in seed]
    best_sse = seed_sse
    if params.dive and not sol.is_integral():
        known = {C: pool.weight(C) for C in pool.clusters}
        dived = dive(pts, ds, m, known, params, deadline)
        for C in known:
            pool.add(C, known[C])
        for C in dived:
            pool.add(C)
        dived_sse = float(sum(pool.weight(C) for C in dived))
        if dived_sse < best_sse:
            best, best_sse = [tuple(C) for C in dived], dived_sse
    n_dive = len(pool.clusters)

    def round_master(incumbent):
        remaining = max(0.0, deadline - time.perf_counter())
        return solve_restricted_master_binary(
            pool.master.columns,
            len(pts),
            time_limit=min(params.rounding_time_limit, remaining),
            incumbent=incumbent,
        )

    rounded = round_master([pool.index(C) for C in best])
    exact = rounded.optimal and lp_optimal
    gap = rounded.objective - lp_bound
    if lp_optimal and gap > 1e-9 and params.enumeration_limit > 0:
        # Every cluster of a cheaper integer solution has reduced cost below the gap.
        extra, complete = enumerate_columns(
            pool.inst.with_duals(duals), gap + 1e-9, limit=params.enumeration_limit, node_cap=params.node_cap
        )
        if any([pool.add(c.cluster) for c in extra]):
            rounded = round_master(rounded.selected)
        exact = complete and rounded.optimal
        logger.debug("enumerated %d columns below gap %.3g (complete=%s)", len(extra), gap, complete)
    elif gap > 1e-9:
        exact = False
    clustering = [tuple(sorted(pts[k] for k in C)) for C in rounded.clustering]
    sse = rounded.objective
    if sse > best_sse:
        clustering, sse = best, best_sse

    return ColGenResult(
        clustering=clustering,
        sse=sse,
        lp_bound=lp_bound,
        columns_generated=n_dive - n_seed,
        iterations=iterations,
        wall_time=time.perf_counter() - start,
        lp_optimal=lp_optimal,
        rounding_optimal=exact,
        seed_sse=seed_sse,
        points=pts,
        duals=duals,
        n_columns=len(pool.clusters),
        cg_time=cg_time,
    )
