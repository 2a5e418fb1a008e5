"""Pricing: find the feasible cluster of minimum reduced cost ``w_C - sum_{i in C} lambda_i``.

The search is a depth-first enumeration of index-ordered candidate sets
(candidates sorted by decreasing dual). With chosen set ``S`` of size ``k`` and
target size ``eta``, every completion costs at least::

    (1/eta) * pairs(S) - lambda(S) + sum of the (eta - k) smallest
        [(1/eta) * sum_{i in S} D_ij - lambda_j]   over admissible later j

because distances among the added points are non-negative. Same-colored
pairs are made inadmissible by storing ``inf`` in the distance cache.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numba import njit

from .core import Cluster, Dataset, InvalidInputError, pairwise_sq_distances

NEGATIVE_RC = -1e-7
DEFAULT_NODE_CAP = 5_000_000


@dataclass(frozen=True)
class PricingInstance:
    """Points of one subset, their admissible-pair distances and the current duals.

    ``D[a, b]`` is the squared distance between ``points[a]`` and ``points[b]``
    for differently colored pairs and ``inf`` otherwise (including the diagonal).
    """

    points: tuple[int, ...]
    colors: np.ndarray
    D: np.ndarray
    duals: np.ndarray
    m: int

    @classmethod
    def build(cls, ds: Dataset, points: Sequence[int], m: int, duals=None) -> PricingInstance:
        pts = tuple(int(i) for i in points)
        colors = ds.colors[list(pts)]
        D = pairwise_sq_distances(ds.X[list(pts)])
        D[colors[:, None] == colors[None, :]] = np.inf
        D.setflags(write=False)
        if duals is None:
            duals = np.zeros(len(pts))
        return cls(pts, colors, D, np.asarray(duals, dtype=float), m)

    def with_duals(self, duals) -> PricingInstance:
        duals = np.asarray(duals, dtype=float)
        if duals.shape != (len(self.points),):
            raise InvalidInputError("one dual per subset point is required")
        return replace(self, duals=duals)

    @property
    def n_colors(self) -> int:
        return len(np.unique(self.colors))


@dataclass(frozen=True)
class PricedColumn:
    cluster: Cluster  # global point indices
    reduced_cost: float
    weight: float
    exact: bool


@njit(cache=True)
def _fill_suffix(acc_row, lam, eta, q, start, out, buf):
    # out[pos] = sum of the q smallest finite marginals at positions >= pos (inf if fewer exist)
    n = lam.shape[0]
    cnt = 0
    total = 0.0
    out[n] = np.inf
    for pos in range(n - 1, start - 1, -1):
        a = acc_row[pos]
        if a != np.inf:
            v = a / eta - lam[pos]
            if cnt < q:
                t = cnt
                while t > 0 and buf[t - 1] > v:
                    buf[t] = buf[t - 1]
                    t -= 1
                buf[t] = v
                cnt += 1
                total += v
            elif v < buf[q - 1]:
                total += v - buf[q - 1]
                t = q - 1
                while t > 0 and buf[t - 1] > v:
                    buf[t] = buf[t - 1]
                    t -= 1
                buf[t] = v
        out[pos] = total if cnt == q else np.inf


@njit(cache=True)
def _dfs(D, lam, eta, cutoff, node_cap, prune, collect_limit, found):
    """Depth-first search over index-ordered ``eta``-subsets.

    Minimizing mode (``collect_limit == 0``) tightens ``best`` as it goes;
    collecting mode keeps the cutoff fixed and records every subset below it
    in ``found``.
    """
    n = lam.shape[0]
    acc = np.zeros((eta, n))
    pairs = np.zeros(eta)
    lsum = np.zeros(eta)
    ptr = np.zeros(eta, np.int64)
    chosen = np.zeros(eta, np.int64)
    best_set = np.full(eta, -1, np.int64)
    suffix = np.zeros((eta, n + 1))
    buf = np.zeros(eta)
    best = cutoff
    nodes = 0
    n_found = 0
    capped = False
    collect = collect_limit > 0
    if prune and eta > 1:
        _fill_suffix(acc[0], lam, eta, eta - 1, 0, suffix[0], buf)
    k = 0
    while k >= 0 and not capped:
        need = eta - k
        partial = pairs[k] / eta - lsum[k]
        if need == 1:
            for j in range(ptr[k], n):
                a = acc[k, j]
                if a == np.inf:
                    continue
                nodes += 1
                v = partial + a / eta - lam[j]
                if v < best:
                    chosen[k] = j
                    if collect:
                        found[n_found, :] = chosen
                        n_found += 1
                        if n_found >= collect_limit:
                            capped = True
                            break
                    else:
                        best = v
                        best_set[:] = chosen
            if nodes >= node_cap:
                capped = True
            k -= 1
            continue
        descended = False
        j = ptr[k]
        while j <= n - need:
            a = acc[k, j]
            if a == np.inf:
                j += 1
                continue
            if prune and partial + a / eta - lam[j] + suffix[k, j + 1] >= best:
                j += 1
                continue
            nodes += 1
            chosen[k] = j
            ptr[k] = j + 1
            for t in range(j + 1, n):
                acc[k + 1, t] = acc[k, t] + D[j, t]
            pairs[k + 1] = pairs[k] + a
            lsum[k + 1] = lsum[k] + lam[j]
            ptr[k + 1] = j + 1
            k += 1
            if prune and need - 1 >= 2:
                _fill_suffix(acc[k], lam, eta, need - 2, j + 1, suffix[k], buf)
            descended = True
            break
        if not descended:
            k -= 1
        if nodes >= node_cap:
            capped = True
    return best, n_found, nodes, capped, best_set


def _search(inst: PricingInstance, eta: int, cutoff: float, node_cap: int, prune: bool, collect_limit: int = 0):
    order = np.argsort(-inst.duals, kind="stable")
    lam = np.ascontiguousarray(inst.duals[order])
    D = np.ascontiguousarray(inst.D[np.ix_(order, order)])
    found = np.zeros((max(collect_limit, 1), eta), dtype=np.int64)
    best, n_found, nodes, capped, best_set = _dfs(
        D, lam, eta, float(cutoff), int(node_cap), bool(prune), int(collect_limit), found
    )
    return order, best, found[:n_found], int(nodes), bool(capped), best_set


def _column(inst: PricingInstance, local, exact: bool) -> PricedColumn:
    local = sorted(int(a) for a in local)
    sub = inst.D[np.ix_(local, local)]
    weight = float(np.where(np.isfinite(sub), sub, 0.0).sum() / (2 * len(local)))
    cluster = tuple(sorted(inst.points[a] for a in local))
    return PricedColumn(cluster, weight - float(inst.duals[local].sum()), weight, exact)


def min_reduced_cost_cluster(
    inst: PricingInstance,
    eta: int,
    *,
    cutoff: float = np.inf,
    node_cap: int = DEFAULT_NODE_CAP,
    prune: bool = True,
) -> PricedColumn | None:
    """Cheapest cluster of exactly ``eta`` differently colored points.

    Returns ``None`` when no cluster of that size exists or, with a finite
    ``cutoff``, when none has reduced cost strictly below it. ``exact`` is
    false when the node cap interrupted the search; a capped search that found
    nothing yields an empty cluster with infinite reduced cost.
    """
    if eta < 1:
        raise InvalidInputError("cluster size must be positive")
    if eta > inst.n_colors:
        return None
    order, best, _, _, capped, best_set = _search(inst, eta, cutoff, node_cap, prune)
    if best_set[0] < 0:
        return PricedColumn((), np.inf, np.inf, False) if capped else None
    return _column(inst, order[best_set], not capped)


def enumerate_columns(
    inst: PricingInstance,
    max_reduced_cost: float,
    *,
    limit: int = 2000,
    node_cap: int = DEFAULT_NODE_CAP,
) -> tuple[list[PricedColumn], bool]:
    """All feasible clusters (sizes ``m..2m-1``) with reduced cost below ``max_reduced_cost``.

    Returns at most ``limit`` columns and a completeness flag (false when
    ``limit`` or ``node_cap`` stopped the enumeration early).
    """
    out: list[PricedColumn] = []
    for eta in range(inst.m, 2 * inst.m):
        if eta > inst.n_colors:
            continue
        order, _, found, _, capped, _ = _search(
            inst, eta, max_reduced_cost, node_cap, True, collect_limit=limit - len(out)
        )
        out.extend(_column(inst, order[row], True) for row in found)
        if capped:
            return out, False
    return out, True


@dataclass(frozen=True)
class PricingOutcome:
    column: PricedColumn | None
    exact: bool
    per_size: dict[int, PricedColumn]


def price_all_sizes(
    inst: PricingInstance,
    *,
    threshold: float = NEGATIVE_RC,
    node_cap: int = DEFAULT_NODE_CAP,
    prune: bool = True,
) -> PricingOutcome:
    """Best improving column over sizes ``m..2m-1``.

    ``column`` is ``None`` when no size yields a reduced cost below ``threshold``;
    combined with ``exact`` this certifies LP optimality over all feasible clusters.
    Each size search uses the best value found so far as its cutoff.
    """
    best: PricedColumn | None = None
    exact = True
    per_size: dict[int, PricedColumn] = {}
    for eta in range(inst.m, 2 * inst.m):
        cutoff = threshold if best is None else min(threshold, best.reduced_cost)
        res = min_reduced_cost_cluster(inst, eta, cutoff=cutoff, node_cap=node_cap, prune=prune)
        if res is None:
            continue
        if not res.exact:
            exact = False
        if not res.cluster:
            continue
        per_size[eta] = res
        if best is None or res.reduced_cost < best.reduced_cost:
            best = res
    if best is not None and not best.reduced_cost < threshold:
        best = None
    return PricingOutcome(best, exact, per_size)
