"""Restricted master problem: a dense revised simplex plus branch-and-bound rounding.

The master LP is::

    min  sum_C w_C x_C
    s.t. sum_{C : i in C} x_C = 1    for every point i
         x_C >= 0

(the upper bound ``x_C <= 1`` is implied by the equality rows). The solver keeps
an explicit basis inverse, updated by rank-one pivots and refactorized
periodically. One artificial variable per row provides the starting basis;
after phase one the artificials are frozen at zero, so the basis always stays
square and the duals ``lambda = c_B B^{-1}`` are well defined even when rows
are linearly dependent.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Cluster, Clustering, InfeasibleError, InvalidInputError

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-9


class SolverError(RuntimeError):
    """Numerical breakdown inside the simplex method."""


class SingularBasisError(SolverError):
    """The current basis matrix is singular or too ill-conditioned to invert."""


@dataclass(frozen=True)
class Column:
    cluster: Cluster
    weight: float


@dataclass
class MasterSolution:
    primal: np.ndarray
    duals: np.ndarray
    objective: float
    basis: np.ndarray
    pivots: int = 0

    def selected(self, tol: float = FEAS_TOL) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.primal > tol)]

    def is_integral(self, tol: float = 1e-6) -> bool:
        x = self.primal
        return bool(np.all((x < tol) | (x > 1 - tol)))


class RevisedSimplex:
    """Dense revised simplex for ``min c x, A x = 1, x >= 0``.

    Variables ``0..r-1`` are the artificials; structural column ``j`` is
    variable ``r + j``. Structural columns can be *barred*: like the
    artificials they may not enter the basis and are driven to zero by a
    phase one whenever the current basis holds them at a positive level.
    Columns may be appended and bars changed between solves; each solve
    starts from the previous basis.
    """

    def __init__(self, n_rows: int, *, degeneracy_threshold: int = 50, refactor_every: int = 64):
        if n_rows < 1:
            raise InvalidInputError("the master problem needs at least one row")
        self.r = n_rows
        self._A = np.zeros((n_rows, 16))
        self._c = np.zeros(16)
        self._barred = np.zeros(16, dtype=bool)
        self.n = 0
        self.degeneracy_threshold = degeneracy_threshold
        self.refactor_every = refactor_every
        self.basis = np.arange(n_rows)
        self.Binv = np.eye(n_rows)
        self.xB = np.ones(n_rows)
        self.total_pivots = 0

    @property
    def A(self) -> np.ndarray:
        return self._A[:, : self.n]

    @property
    def c(self) -> np.ndarray:
        return self._c[: self.n]

    @property
    def barred(self) -> np.ndarray:
        return self._barred[: self.n]

    def add_column(self, a: np.ndarray, cost: float) -> int:
        if self.n == self._A.shape[1]:
            self._A = np.hstack([self._A, np.zeros_like(self._A)])
            self._c = np.concatenate([self._c, np.zeros_like(self._c)])
            self._barred = np.concatenate([self._barred, np.zeros_like(self._barred)])
        self._A[:, self.n] = a
        self._c[self.n] = cost
        self.n += 1
        return self.n - 1

    def set_barred(self, mask) -> None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n,):
            raise InvalidInputError("bar mask must cover every column")
        self._barred[: self.n] = mask

    def set_basis(self, basis: np.ndarray) -> None:
        """Restart from a previously returned basis (it stays primal feasible: b never changes)."""
        self.basis = np.array(basis, dtype=np.int64)
        self._refactor()

    def _column(self, var: int) -> np.ndarray:
        if var < self.r:
            e = np.zeros(self.r)
            e[var] = 1.0
            return e
        return self._A[:, var - self.r]

    def _refactor(self) -> None:
        B = np.column_stack([self._column(v) for v in self.basis])
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SingularBasisError(f"singular basis (rank {np.linalg.matrix_rank(B)} of {self.r})") from exc
        residual = np.abs(B @ Binv - np.eye(self.r)).max()
        if not np.isfinite(residual) or residual > 1e-6:
            raise SingularBasisError(
                f"ill-conditioned basis: condition number {np.linalg.cond(B):.3e}, residual {residual:.3e}"
            )
        self.Binv = Binv
        self.xB = Binv.sum(axis=1)  # B^{-1} b with b = 1
        self.xB[np.abs(self.xB) < 1e-13] = 0.0

    def _basis_barred(self) -> np.ndarray:
        out = self.basis < self.r
        struct = ~out
        out[struct] = self._barred[self.basis[struct] - self.r]
        return out

    def _basic_costs(self, phase: int) -> np.ndarray:
        if phase == 1:
            return self._basis_barred().astype(float)
        cB = np.zeros(self.r)
        struct = self.basis >= self.r
        cB[struct] = self._c[self.basis[struct] - self.r]
        return cB

    def duals(self, phase: int = 2) -> np.ndarray:
        return self._basic_costs(phase) @ self.Binv

    def reduced_costs(self, phase: int = 2) -> np.ndarray:
        lam = self.duals(phase)
        cost = self.barred.astype(float) if phase == 1 else self.c
        return cost - lam @ self.A

    def _iterate(self, phase: int, max_pivots: int) -> None:
        degenerate_run = 0
        since_refactor = 0
        blocked = np.zeros(self.n, dtype=bool)
        struct = self.basis >= self.r
        blocked[self.basis[struct] - self.r] = True
        barred = self.barred
        for _ in range(max_pivots):
            rc = self.reduced_costs(phase)
            rc[blocked | barred] = 0.0
            bland = degenerate_run >= self.degeneracy_threshold
            candidates = np.flatnonzero(rc < -OPT_TOL)
            if candidates.size == 0:
                return
            if bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmin(rc[candidates])])
            q = self.r + j
            d = self.Binv @ self._A[:, j]

            frozen = self._basis_barred()
            # pivot tolerance scaled to the entering column so tiny entries never pivot
            tol = PIVOT_TOL * max(1.0, float(np.abs(d).max()))
            if phase == 2:
                # barred variables sit at zero: any usable pivot entry blocks at step 0
                forced = frozen & (np.abs(d) > tol)
            else:
                forced = np.zeros(self.r, dtype=bool)
            eligible = (d > tol) | forced
            if not eligible.any():
                raise SolverError("unbounded direction in a bounded master problem")
            ratios = np.full(self.r, np.inf)
            pos = eligible & ~forced
            ratios[pos] = np.maximum(self.xB[pos], 0.0) / d[pos]
            ratios[forced] = 0.0
            theta = ratios.min()
            ties = np.flatnonzero(ratios <= theta + 1e-12)
            # among ties keep only pivots within a factor of the largest one
            big = np.abs(d[ties]) >= 1e-3 * np.abs(d[ties]).max()
            ties = ties[big]
            if bland:
                row = int(ties[np.argmin(self.basis[ties])])
            else:
                # prefer dropping a barred variable, then the largest pivot for stability
                key = np.where(frozen[ties], 1e6, 0.0) + np.abs(d[ties])
                row = int(ties[np.argmax(key)])

            piv = d[row]
            self.xB -= theta * d
            self.xB[row] = theta
            self.xB[np.abs(self.xB) < 1e-13] = 0.0
            pivot_row = self.Binv[row] / piv
            self.Binv -= np.outer(d, pivot_row)
            self.Binv[row] = pivot_row
            leaving = self.basis[row]
            if leaving >= self.r:
                blocked[leaving - self.r] = False
            blocked[j] = True
            self.basis[row] = q
            self.total_pivots += 1

            # near-zero objective progress counts as degenerate so Bland's rule stays engaged
            degenerate_run = degenerate_run + 1 if theta * -rc[j] <= 1e-12 else 0
            since_refactor += 1
            if since_refactor >= self.refactor_every:
                self._refactor()
                since_refactor = 0
        raise SolverError(f"pivot limit {max_pivots} reached in phase {phase}")

    def infeasibility(self) -> float:
        return float(self.xB[self._basis_barred()].clip(min=0.0).sum())

    def reset(self) -> None:
        """Drop back to the all-artificial basis."""
        self.basis = np.arange(self.r)
        self.Binv = np.eye(self.r)
        self.xB = np.ones(self.r)

    def _solve_phases(self, max_pivots: int) -> None:
        if self.infeasibility() > FEAS_TOL:
            self._iterate(1, max_pivots)
            residual = self.infeasibility()
            if residual > FEAS_TOL * self.r:
                raise InfeasibleError(f"columns cannot cover all rows (phase-one residual {residual:.3g})")
        self._iterate(2, max_pivots)
        self._refactor()

    def solve(self, max_pivots: int | None = None) -> MasterSolution:
        if max_pivots is None:
            max_pivots = 50 * (self.r + self.n) + 1000
        start = self.total_pivots
        try:
            self._solve_phases(max_pivots)
        except SingularBasisError as exc:
            # lost numerical accuracy: restart cold once
            logger.warning("%s; restarting from the artificial basis", exc)
            self.reset()
            self._solve_phases(max_pivots)
        x = np.zeros(self.n)
        struct = self.basis >= self.r
        x[self.basis[struct] - self.r] = np.clip(self.xB[struct], 0.0, None)
        x[self.barred] = 0.0
        return MasterSolution(
            primal=x,
            duals=self.duals(2),
            objective=float(self.c @ x),
            basis=self.basis.copy(),
            pivots=self.total_pivots - start,
        )


def _incidence(cluster: Sequence[int], n_rows: int, row_of: dict[int, int] | None = None) -> np.ndarray:
    a = np.zeros(n_rows)
    for i in cluster:
        a[i if row_of is None else row_of[i]] = 1.0
    return a


class RestrictedMaster:
    """Stateful master LP over a growing pool of columns for points ``0..p-1``."""

    def __init__(self, p: int, columns: Sequence[Column] = (), **kwargs):
        self.p = p
        self.columns: list[Column] = []
        self._index: dict[Cluster, int] = {}
        self._lp = RevisedSimplex(p, **kwargs)
        for col in columns:
            self.add_column(col)

    def __contains__(self, cluster: Cluster) -> bool:
        return tuple(cluster) in self._index

    def index(self, cluster: Cluster) -> int:
        return self._index[tuple(cluster)]

    def add_column(self, col: Column) -> int:
        key = tuple(col.cluster)
        if key in self._index:
            known = self.columns[self._index[key]].weight
            if abs(known - col.weight) > 1e-9 * (1.0 + abs(known)):
                raise InvalidInputError(f"column {key} given with two different weights")
            return self._index[key]
        if not key or min(key) < 0 or max(key) >= self.p:
            raise InvalidInputError(f"column {key} references points outside 0..{self.p - 1}")
        self._index[key] = len(self.columns)
        self.columns.append(col)
        self._lp.add_column(_incidence(key, self.p), col.weight)
        return self._index[key]

    def solve(self) -> MasterSolution:
        return self._lp.solve()


def solve_restricted_master(columns: Sequence[Column], p: int) -> MasterSolution:
    """LP relaxation over ``columns``; primal values are aligned with the input order.

    Duplicate clusters (which must carry equal weights) are collapsed onto
    their first occurrence.
    """
    master = RestrictedMaster(p)
    position = [master.add_column(col) for col in columns]
    sol = master.solve()
    primal = np.zeros(len(columns))
    seen = set()
    for k, j in enumerate(position):
        if j not in seen:
            primal[k] = sol.primal[j]
            seen.add(j)
    sol.primal = primal
    return sol


@dataclass
class IntegerSolution:
    clustering: Clustering
    objective: float
    optimal: bool
    nodes: int = 0
    selected: list[int] = field(default_factory=list)


def solve_restricted_master_binary(
    columns: Sequence[Column],
    p: int,
    time_limit: float | None = 60.0,
    incumbent: Sequence[int] | None = None,
    branching: str = "variable",
) -> IntegerSolution:
    """Best 0/1 selection of ``columns`` partitioning ``0..p-1``.

    Depth-first branch and bound on the LP relaxation: branch on the most
    fractional column, "include" before "exclude". Including column ``C`` bars
    every other column meeting ``C``; excluding it bars ``C`` itself. Each node
    warm starts from its parent's basis. An LP dive runs first to find an
    incumbent quickly. ``incumbent`` (column indices forming
    a partition) primes the upper bound. When the time limit cuts the search,
    the best incumbent is returned with ``optimal=False``.
    """
    start = time.perf_counter()
    n = len(columns)
    weights = np.array([c.weight for c in columns], dtype=float)
    A = np.zeros((p, n), dtype=bool)
    for j, col in enumerate(columns):
        A[list(col.cluster), j] = True
    overlap = (A.T.astype(np.int32) @ A.astype(np.int32)) > 0

    best_obj = np.inf
    best_sel: list[int] | None = None
    if incumbent is not None:
        covered = sorted(i for j in incumbent for i in columns[j].cluster)
        if covered != list(range(p)):
            raise InvalidInputError("incumbent columns do not partition the points")
        best_sel = sorted(incumbent)
        best_obj = float(weights[best_sel].sum())

    lp = RevisedSimplex(p)
    for j in range(n):
        lp.add_column(A[:, j].astype(float), weights[j])

    # LP diving: fix the largest fractional column to one; on infeasibility bar it instead
    barred = np.zeros(n, dtype=bool)
    basis = None
    last: tuple[np.ndarray, np.ndarray, int] | None = None
    while time_limit is None or time.perf_counter() - start <= time_limit:
        lp.set_barred(barred)
        if basis is not None:
            lp.set_basis(basis)
        try:
            sol = lp.solve()
        except (InfeasibleError, SolverError):
            sol = None
        if sol is None or sol.objective >= best_obj - 1e-9:
            if last is None:
                break
            barred, basis, j = last
            barred = barred.copy()
            barred[j] = True
            last = None
            continue
        x = sol.primal
        frac = (x > 1e-6) & (x < 1 - 1e-6)
        if not frac.any():
            sel = [int(j) for j in np.flatnonzero(x > 0.5)]
            best_obj, best_sel = float(weights[sel].sum()), sel
            break
        j = int(np.argmax(np.where(frac, x, -1.0)))
        last = (barred, sol.basis, j)
        barred = barred | overlap[j]
        barred[j] = False
        basis = sol.basis

    stack: list[tuple[np.ndarray, np.ndarray | None]] = [(np.zeros(n, dtype=bool), None)]
    nodes = 0
    optimal = True
    while stack:
        if time_limit is not None and time.perf_counter() - start > time_limit:
            optimal = False
            break
        barred, basis = stack.pop()
        nodes += 1
        lp.set_barred(barred)
        if basis is not None:
            lp.set_basis(basis)
        try:
            sol = lp.solve()
        except InfeasibleError:
            continue
        except SolverError as exc:
            logger.warning("branch and bound node skipped: %s", exc)
            optimal = False
            continue
        if sol.objective >= best_obj - 1e-9:
            continue
        x = sol.primal
        frac = np.minimum(x, 1 - x)
        if np.all(frac < 1e-6):
            sel = [int(j) for j in np.flatnonzero(x > 0.5)]
            best_obj, best_sel = float(weights[sel].sum()), sel
            continue
        if branching == "pair":
            # Ryan-Foster: pick rows (r, t) whose joint coverage is most fractional
            together = (A.astype(float) * x) @ A.T.astype(float)
            np.fill_diagonal(together, 0.0)
            score = np.minimum(together, 1 - together)
            r, t = np.unravel_index(int(np.argmax(score)), score.shape)
            both = A[r] & A[t]
            one = A[r] ^ A[t]
            stack.append((barred | both, sol.basis))
            stack.append((barred | one, sol.basis))
            continue
        j = int(np.argmax(frac))  # first maximum: smallest column index among ties
        exclude = barred.copy()
        exclude[j] = True
        include = barred | overlap[j]
        include[j] = False
        stack.append((exclude, sol.basis))
        stack.append((include, sol.basis))

    if best_sel is None:
        if optimal:
            raise InfeasibleError("no 0/1 selection of the columns partitions the points")
        raise InfeasibleError("time limit reached before any integer cover was found")
    clustering = [tuple(columns[j].cluster) for j in best_sel]
    logger.debug("branch and bound: %d nodes, objective %.6g, optimal=%s", nodes, best_obj, optimal)
    return IntegerSolution(clustering, best_obj, optimal, nodes, best_sel)
