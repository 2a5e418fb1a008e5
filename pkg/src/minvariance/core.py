"""Domain types, clustering metrics and feasibility predicates.

Points live in R^d and carry an integer color (the sensitive value code).
Clusters are tuples of point indices into a :class:`Dataset`; a clustering is a
list of clusters. All metrics are plain float64 arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

ABS_TOL = 1e-9

Cluster = tuple[int, ...]
Clustering = list[Cluster]


class InvalidInputError(ValueError):
    """Input violates a documented precondition."""


class InfeasibleError(RuntimeError):
    """No feasible clustering exists (or the supplied columns cannot cover the points)."""


class DegenerateDatasetError(InvalidInputError):
    """The dataset has zero total spread, so information loss is undefined."""


@dataclass(frozen=True)
class PointRecord:
    id: str
    qis: np.ndarray
    color: int


@dataclass(frozen=True)
class Dataset:
    """Microdata: one row per respondent, numeric quasi-identifiers plus a color code.

    ``X`` has shape ``(p, d)``; ``colors[i]`` indexes ``color_names``.
    """

    ids: tuple[str, ...]
    X: np.ndarray
    colors: np.ndarray
    color_names: tuple[str, ...]
    standardized: bool = False
    qi_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        colors = np.asarray(self.colors, dtype=np.int64)
        if X.ndim != 2:
            raise InvalidInputError("X must be a 2-D array")
        if len(self.ids) != X.shape[0] or colors.shape != (X.shape[0],):
            raise InvalidInputError("ids, X and colors must have the same length")
        if len(set(self.ids)) != len(self.ids):
            raise InvalidInputError("point ids must be unique")
        if colors.size and (colors.min() < 0 or colors.max() >= len(self.color_names)):
            raise InvalidInputError("color code outside the color dictionary")
        X.setflags(write=False)
        colors.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "color_names", tuple(self.color_names))

    @classmethod
    def from_arrays(cls, X, colors, ids=None, color_names=None, **kwargs) -> Dataset:
        """Build a dataset from raw arrays; ids default to ``"0".."p-1"``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        colors = np.asarray(colors, dtype=np.int64)
        if ids is None:
            ids = [str(i) for i in range(X.shape[0])]
        if color_names is None:
            n_colors = int(colors.max()) + 1 if colors.size else 0
            color_names = [str(c) for c in range(n_colors)]
        return cls(tuple(ids), X, colors, tuple(color_names), **kwargs)

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.p

    def point(self, i: int) -> PointRecord:
        return PointRecord(self.ids[i], self.X[i], int(self.colors[i]))

    def subset(self, indices: Sequence[int]) -> Dataset:
        """Rows ``indices`` (in the given order) with the same color dictionary."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            tuple(self.ids[i] for i in idx),
            self.X[idx],
            self.colors[idx],
            self.color_names,
            self.standardized,
            self.qi_names,
        )

    def standardize(self) -> Dataset:
        """Per-attribute z-scores; constant attributes are only centered."""
        mean = self.X.mean(axis=0)
        std = self.X.std(axis=0)
        std[std == 0] = 1.0
        return Dataset(self.ids, (self.X - mean) / std, self.colors, self.color_names, True, self.qi_names)

    def with_color_names(self, names: Iterable[str]) -> Dataset:
        """Extend the color dictionary with ``names`` (existing codes are kept)."""
        merged = list(self.color_names)
        known = set(merged)
        for name in names:
            if name not in known:
                merged.append(name)
                known.add(name)
        return Dataset(self.ids, self.X, self.colors, tuple(merged), self.standardized, self.qi_names)

    def color_code(self, name: str) -> int:
        try:
            return self.color_names.index(name)
        except ValueError:
            raise InvalidInputError(f"unknown sensitive value {name!r}") from None


def make_cluster(members: Iterable[int]) -> Cluster:
    """Canonical cluster: strictly increasing member indices."""
    out = tuple(sorted(int(i) for i in members))
    if len(set(out)) != len(out):
        raise InvalidInputError(f"duplicate members in cluster {out}")
    return out


def squared_distance(a, b) -> float:
    a = np.asarray(getattr(a, "qis", a), dtype=np.float64)
    b = np.asarray(getattr(b, "qis", b), dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(diff @ diff)


def pairwise_sq_distances(X: np.ndarray) -> np.ndarray:
    """Dense matrix of squared Euclidean distances, exactly symmetric, zero diagonal."""
    X = np.asarray(X, dtype=np.float64)
    diff = X[:, None, :] - X[None, :, :]
    D = np.einsum("ijk,ijk->ij", diff, diff)
    return D


def _members(C: Sequence[int]) -> np.ndarray:
    idx = np.asarray(C, dtype=np.int64)
    if idx.size == 0:
        raise InvalidInputError("empty cluster")
    return idx


def cluster_weight(C: Sequence[int], ds: Dataset) -> float:
    """Column cost: ``1/(2|C|)`` times the sum of squared distances over ordered pairs."""
    idx = _members(C)
    D = pairwise_sq_distances(ds.X[idx])
    return float(D.sum() / (2.0 * idx.size))


def cluster_sse(C: Sequence[int], ds: Dataset) -> float:
    """Sum of squared deviations of the members from their centroid."""
    idx = _members(C)
    pts = ds.X[idx]
    dev = pts - pts.mean(axis=0)
    return float(np.einsum("ij,ij->", dev, dev))


def check_partition(K: Sequence[Sequence[int]], p: int) -> None:
    seen = np.zeros(p, dtype=bool)
    for C in K:
        for i in C:
            if not 0 <= i < p:
                raise InvalidInputError(f"point index {i} out of range 0..{p - 1}")
            if seen[i]:
                raise InvalidInputError(f"point {i} appears in more than one cluster")
            seen[i] = True
    if not seen.all():
        missing = np.flatnonzero(~seen)[:10].tolist()
        raise InvalidInputError(f"clustering does not cover points {missing}")


def total_sse(K: Sequence[Sequence[int]], ds: Dataset) -> float:
    check_partition(K, ds.p)
    return float(sum(cluster_sse(C, ds) for C in K))


def sst(ds: Dataset) -> float:
    if ds.p == 0:
        raise InvalidInputError("empty dataset")
    dev = ds.X - ds.X.mean(axis=0)
    return float(np.einsum("ij,ij->", dev, dev))


def information_loss(K: Sequence[Sequence[int]], ds: Dataset) -> float:
    """``100 * SSE / SST``; raises :class:`DegenerateDatasetError` when SST is zero."""
    total = sst(ds)
    if total <= ABS_TOL:
        raise DegenerateDatasetError("all points are identical (SST = 0); information loss is undefined")
    return 100.0 * total_sse(K, ds) / total


def is_feasible_cluster(C: Sequence[int], ds: Dataset, m: int) -> bool:
    if not m <= len(C) <= 2 * m - 1:
        return False
    colors = ds.colors[np.asarray(C, dtype=np.int64)]
    return len(np.unique(colors)) == len(C)


def is_feasible_clustering(K: Sequence[Sequence[int]], ds: Dataset, m: int) -> bool:
    try:
        check_partition(K, ds.p)
    except InvalidInputError:
        return False
    return all(is_feasible_cluster(C, ds, m) for C in K)


def is_feasible_instance(ds: Dataset, m: int) -> bool:
    """Counting test: a feasible clustering exists iff no color holds more than ``p/m`` points."""
    if ds.p == 0:
        return False
    counts = np.bincount(ds.colors)
    return int(counts.max()) * m <= ds.p


def centroid(C: Sequence[int], ds: Dataset) -> np.ndarray:
    return ds.X[_members(C)].mean(axis=0)
