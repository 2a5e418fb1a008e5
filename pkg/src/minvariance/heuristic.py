"""Greedy bucketization: the initial feasible clustering.

Assignment repeatedly draws one point from each of the ``m`` currently most
frequent colors; rows drawn with the same color set form one balanced bucket.
Partitioning then splits every bucket into groups holding one point per color,
MDAV-style (farthest seed, nearest attachments).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    Cluster,
    Clustering,
    Dataset,
    InfeasibleError,
    InvalidInputError,
    make_cluster,
)


@dataclass
class Bucket:
    """Points keyed by color; balanced when every color holds the same number of rows."""

    signature: frozenset[int]
    rows: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        self.signature = frozenset(int(c) for c in self.signature)
        for c in self.signature:
            self.rows.setdefault(c, [])
        extra = set(self.rows) - self.signature
        if extra:
            raise InvalidInputError(f"bucket rows keyed by colors outside the signature: {sorted(extra)}")

    @property
    def balanced(self) -> bool:
        return len({len(v) for v in self.rows.values()}) <= 1

    @property
    def n_rows(self) -> int:
        return max((len(v) for v in self.rows.values()), default=0)

    def points(self) -> list[int]:
        return sorted(i for v in self.rows.values() for i in v)


def _draw_rows(points: Sequence[int], ds: Dataset, m: int) -> tuple[list[Bucket], list[int]]:
    """Greedy assignment; returns buckets plus the residue that could not form a full row."""
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    queues: dict[int, list[int]] = {}
    for i in sorted(int(i) for i in points):
        queues.setdefault(int(ds.colors[i]), []).append(i)
    for q in queues.values():
        q.reverse()  # pop() yields the smallest index

    buckets: dict[frozenset[int], Bucket] = {}
    while True:
        live = [c for c, q in queues.items() if q]
        if len(live) < m:
            break
        # most frequent first; ties by smallest remaining point index
        live.sort(key=lambda c: (-len(queues[c]), queues[c][-1]))
        chosen = live[:m]
        sig = frozenset(chosen)
        bucket = buckets.get(sig)
        if bucket is None:
            bucket = buckets[sig] = Bucket(sig)
        for c in chosen:
            bucket.rows[c].append(queues[c].pop())
    residue = sorted(i for q in queues.values() for i in q)
    return list(buckets.values()), residue


def assign_buckets(points: Sequence[int], ds: Dataset, m: int) -> list[Bucket]:
    """Split ``points`` into balanced buckets whose signatures have exactly ``m`` colors.

    Raises :class:`InfeasibleError` naming the stranded colors when points remain
    that cannot complete an ``m``-color row.
    """
    buckets, residue = _draw_rows(points, ds, m)
    if residue:
        stranded = sorted({ds.color_names[ds.colors[i]] for i in residue})
        raise InfeasibleError(f"fewer than {m} distinct colors left; stranded colors: {stranded}")
    return buckets


def partition_bucket(b: Bucket, ds: Dataset, m: int) -> list[Cluster]:
    """Split a balanced bucket into groups with one point of every signature color."""
    if not b.balanced:
        raise InvalidInputError("bucket is not balanced")
    if b.n_rows == 0:
        raise InvalidInputError("bucket has empty rows")
    colors = sorted(b.signature)
    pool = {c: list(b.rows[c]) for c in colors}
    members = np.array(b.points())
    center = ds.X[members].mean(axis=0)

    groups = []
    for _ in range(b.n_rows):
        left = sorted(i for c in colors for i in pool[c])
        far = np.einsum("ij,ij->i", ds.X[left] - center, ds.X[left] - center)
        seed = left[int(np.argmax(far))]  # argmax keeps the first, i.e. smallest index
        seed_color = int(ds.colors[seed])
        pool[seed_color].remove(seed)
        group = [seed]
        for c in colors:
            if c == seed_color:
                continue
            cand = sorted(pool[c])
            dist = np.einsum("ij,ij->i", ds.X[cand] - ds.X[seed], ds.X[cand] - ds.X[seed])
            pick = cand[int(np.argmin(dist))]
            pool[c].remove(pick)
            group.append(pick)
        groups.append(make_cluster(group))
    return groups


def _round_robin(points: Sequence[int], ds: Dataset, m: int) -> Clustering:
    # Constructive witness for the counting test: deal color-sorted points into
    # floor(n/m) groups; consecutive equal colors land in distinct groups.
    pts = sorted(points, key=lambda i: (int(ds.colors[i]), i))
    g = len(pts) // m
    groups: list[list[int]] = [[] for _ in range(g)]
    for k, i in enumerate(pts):
        groups[k % g].append(i)
    return [make_cluster(grp) for grp in groups]


def initial_clustering(ds: Dataset, m: int, points: Sequence[int] | None = None) -> Clustering:
    """Feasible starting clustering of ``points`` (default: all of ``ds``).

    Assignment and bucket partitioning produce groups of exactly ``m`` points;
    leftovers (fewer than ``m`` colors) join the nearest group that lacks their
    color and still has room below ``2m - 1``.
    """
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    pts = list(range(ds.p)) if points is None else sorted(int(i) for i in points)
    if not pts:
        raise InvalidInputError("no points to cluster")
    counts = np.bincount(ds.colors[pts], minlength=len(ds.color_names))
    if int(counts.max()) * m > len(pts):
        worst = [ds.color_names[c] for c in np.flatnonzero(counts * m > len(pts))]
        raise InfeasibleError(
            f"no feasible clustering: colors {worst} occur more than {len(pts)}/{m} times"
        )

    buckets, residue = _draw_rows(pts, ds, m)
    clusters: list[list[int]] = []
    for b in buckets:
        clusters.extend(list(C) for C in partition_bucket(b, ds, m))

    for i in residue:
        ci = int(ds.colors[i])
        best, best_d = None, np.inf
        for k, C in enumerate(clusters):
            if len(C) >= 2 * m - 1 or any(int(ds.colors[j]) == ci for j in C):
                continue
            cen = ds.X[C].mean(axis=0)
            dist = float((ds.X[i] - cen) @ (ds.X[i] - cen))
            if dist < best_d:
                best, best_d = k, dist
        if best is None:
            return _round_robin(pts, ds, m)
        clusters[best].append(i)

    return [make_cluster(C) for C in clusters]
