"""Exhaustive reference solver for tiny instances.

Enumerates every partition of the points into feasible clusters (canonical
form: the smallest unassigned point anchors the next cluster) and keeps the
one of least total SSE. Sub-results are memoized on the set of unassigned
points, which keeps ``p = 12`` instant while still visiting every partition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import Clustering, Dataset, InvalidInputError, make_cluster

DEFAULT_CAP = 12


class BudgetError(InvalidInputError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class OracleResult:
    clustering: Clustering | None
    sse: float
    n_partitions: int

    @property
    def feasible(self) -> bool:
        return self.n_partitions > 0


def _spread(pts: np.ndarray) -> float:
    dev = pts - pts.mean(axis=0)
    return float((dev * dev).sum())


def brute_force_optimal(ds: Dataset, m: int, cap: int = DEFAULT_CAP) -> OracleResult:
    p = ds.p
    if p > cap:
        raise BudgetError(f"brute force refuses p={p} > cap={cap}")
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    X, colors = ds.X, ds.colors.tolist()
    lo, hi = m, 2 * m - 1

    @lru_cache(maxsize=None)
    def solve(remaining: frozenset) -> tuple[float, int, tuple]:
        # returns (best sse, number of feasible partitions, best clusters)
        if not remaining:
            return 0.0, 1, ()
        if len(remaining) < lo:
            return np.inf, 0, ()
        anchor = min(remaining)
        rest = sorted(remaining - {anchor})
        best, count, best_K = np.inf, 0, ()
        for size in range(lo, hi + 1):
            for others in itertools.combinations(rest, size - 1):
                members = (anchor,) + others
                if len({colors[i] for i in members}) != size:
                    continue
                sub_sse, sub_count, sub_K = solve(remaining.difference(members))
                if sub_count == 0:
                    continue
                count += sub_count
                val = _spread(X[list(members)]) + sub_sse
                if val < best:
                    best, best_K = val, (members,) + sub_K
        return best, count, best_K

    best, count, best_K = solve(frozenset(range(p)))
    if count == 0:
        return OracleResult(None, np.inf, 0)
    return OracleResult([make_cluster(C) for C in best_K], float(best), count)
