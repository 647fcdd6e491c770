"""Dense two-phase simplex on a condensed (exchange) tableau.

The tableau keeps one column per *nonbasic* variable only, so its width is
the number of structural columns plus surplus columns, independent of the
row count. Each row reads ``x_B[r] + sum_j T[r, j] * x_N[j] = T[r, -1]``;
the two objective rows at the bottom use the same form with the negated
objective as their basic variable.

Pricing is Dantzig's rule; after ``stall_limit`` consecutive degenerate
pivots the solver switches to Bland's rule until the objective moves again,
which rules out cycling. Infeasibility verdicts on models with at most
``EXACT_CHECK_COLUMNS`` columns are re-derived in rational arithmetic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from invfim import _kernels
from invfim.formulation import EQ, GE, LE, LpModel

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

EXACT_CHECK_COLUMNS = 12


class SolverError(RuntimeError):
    """The solver stopped without a verdict (iteration limit)."""


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tolerance: float = 1e-7
    optimality_tolerance: float = 1e-7
    max_iterations: int | None = None
    pivot_tolerance: float = 1e-9
    stall_limit: int = 50

    def __post_init__(self):
        if self.feasibility_tolerance <= 0 or self.optimality_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass(frozen=True)
class LpSolution:
    status: str
    values: np.ndarray | None
    objective: float
    iterations: int = 0
    exact_checked: bool = field(default=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def solve(model: LpModel, config: SolverConfig | None = None) -> LpSolution:
    """Minimize ``model.objective`` subject to its rows and column bounds."""
    config = config or SolverConfig()
    max_iter = config.max_iterations or 10 * (model.n_columns + model.n_rows)
    A, b, rel = model.dense()
    c = np.array(model.objective, dtype=float)
    lo = np.array(model.lower, dtype=float)
    hi = np.array(model.upper, dtype=float)
    sol = solve_arrays(A, b, rel, c, lo, hi, config, max_iter)
    if sol.status == INFEASIBLE and model.n_columns <= EXACT_CHECK_COLUMNS:
        exact = solve_arrays(A, b, rel, c, lo, hi, config, max_iter, exact=True)
        if exact.status != INFEASIBLE:
            log.warning("float simplex claimed infeasible; exact arithmetic disagrees")
            sol = exact
        sol = LpSolution(sol.status, sol.values, sol.objective, sol.iterations, True)
    return sol


def solve_arrays(A, b, rel, c, lo, hi, config=None, max_iter=None, exact=False) -> LpSolution:
    """Array-level entry point: rows ``A x (rel) b``, bounds ``lo <= x <= hi``."""
    config = config or SolverConfig()
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    nvar = A.shape[1]
    if max_iter is None:
        max_iter = 10 * (A.shape[0] + nvar)

    # single-variable rows become bounds, empty rows are checked directly
    keep = []
    ftol = 0.0 if exact else config.feasibility_tolerance
    for r in range(A.shape[0]):
        nz = np.flatnonzero(A[r])
        if nz.size == 0:
            if not _holds(0.0, rel[r], b[r], ftol):
                return LpSolution(INFEASIBLE, None, math.nan)
            continue
        if nz.size == 1:
            j = nz[0]
            bound = b[r] / A[r, j]
            kind = rel[r]
            if A[r, j] < 0 and kind != EQ:
                kind = GE if kind == LE else LE
            if kind in (LE, EQ):
                hi[j] = min(hi[j], bound)
            if kind in (GE, EQ):
                lo[j] = max(lo[j], bound)
            continue
        keep.append(r)
    if np.any(lo > hi + ftol):
        return LpSolution(INFEASIBLE, None, math.nan)
    A = A[keep]
    b = b[keep]
    rel = [rel[r] for r in keep]
    return _Simplex(A, b, rel, c, lo, hi, config, max_iter, exact).run()


def _holds(lhs, rel, rhs, tol) -> bool:
    if rel == LE:
        return lhs <= rhs + tol
    if rel == GE:
        return lhs >= rhs - tol
    return abs(lhs - rhs) <= tol


class _Simplex:
    def __init__(self, A, b, rel, c, lo, hi, config, max_iter, exact):
        self.exact = exact
        self.cfg = config
        self.max_iter = max_iter
        self.nvar = A.shape[1]
        num = Fraction if exact else float

        # column transform: x = offset + sign * x'  (free vars split in two)
        cols = []  # (orig index, sign)
        offset = np.zeros(self.nvar)
        ub_rows = []
        for j in range(self.nvar):
            if math.isfinite(lo[j]):
                offset[j] = lo[j]
                cols.append((j, 1.0))
                if math.isfinite(hi[j]):
                    ub_rows.append((len(cols) - 1, hi[j] - lo[j]))
            elif math.isfinite(hi[j]):
                offset[j] = hi[j]
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        self.cols = cols
        self.offset = offset
        ns = len(cols)
        R0 = A.shape[0]
        R = R0 + len(ub_rows)
        rows = np.zeros((R, ns))
        rhs = np.zeros(R)
        rels = list(rel) + [LE] * len(ub_rows)
        shifted_b = b - A @ offset
        for p, (j, sign) in enumerate(cols):
            rows[:R0, p] = sign * A[:, j]
        rhs[:R0] = shifted_b
        for r, (p, width) in enumerate(ub_rows):
            rows[R0 + r, p] = 1.0
            rhs[R0 + r] = width
        for r in range(R):
            if rhs[r] < 0 or (rhs[r] == 0 and rels[r] == GE):
                rows[r] *= -1
                rhs[r] *= -1
                rels[r] = {LE: GE, GE: LE, EQ: EQ}[rels[r]]

        ge_rows = [r for r in range(R) if rels[r] == GE]
        N = ns + len(ge_rows)
        dtype = object if exact else np.float64
        T = np.zeros((R + 2, N + 1), dtype=dtype)
        if exact:
            T[:] = Fraction(0)
            for r in range(R):
                for p in np.flatnonzero(rows[r]):
                    T[r, p] = Fraction(rows[r, p])
                T[r, N] = Fraction(rhs[r])
        else:
            T[:R, :ns] = rows
            T[:R, N] = rhs
        for q, r in enumerate(ge_rows):
            T[r, ns + q] = num(-1)

        # variable ids: 0..N-1 start nonbasic, N + r is the row-r slack/artificial
        self.N, self.R, self.ns = N, R, ns
        self.nonbasic = np.arange(N)
        self.basis = np.arange(N, N + R)
        self.is_art = np.zeros(N + R, dtype=bool)
        for r in range(R):
            if rels[r] != LE:
                self.is_art[N + r] = True

        cost = np.zeros(ns)
        for p, (j, sign) in enumerate(cols):
            cost[p] = sign * c[j]
        self.const = float(np.dot(c, offset))
        if exact:
            for p in range(ns):
                T[R, p] = Fraction(cost[p])
        else:
            T[R, :ns] = cost
        art_rows = [r for r in range(R) if self.is_art[N + r]]
        for r in art_rows:
            T[R + 1] -= T[r]
        self.has_phase1 = bool(art_rows)
        self.T = T
        self.iterations = 0

    # -- pivoting -------------------------------------------------------------

    def _tol(self, v):
        return 0 if self.exact else v

    def _entering(self, obj_row, bland):
        T = self.T
        d = T[obj_row, : self.N]
        allowed = ~self.is_art[self.nonbasic]
        if self.exact:
            cand = [j for j in range(self.N) if allowed[j] and d[j] < 0]
            if not cand:
                return None
            if bland:
                return min(cand, key=lambda j: self.nonbasic[j])
            return min(cand, key=lambda j: (d[j], self.nonbasic[j]))
        cand = np.flatnonzero(allowed & (d < -self.cfg.optimality_tolerance))
        if cand.size == 0:
            return None
        if bland:
            return int(cand[np.argmin(self.nonbasic[cand])])
        dv = d[cand]
        best = dv.min()
        ties = cand[dv == best]
        return int(ties[np.argmin(self.nonbasic[ties])])

    def _leaving(self, s, bland):
        T = self.T
        col = T[: self.R, s]
        rhs = T[: self.R, self.N]
        if self.exact:
            rows = [r for r in range(self.R) if col[r] > 0]
            if not rows:
                return None, None
            theta = min(rhs[r] / col[r] for r in rows)
            ties = [r for r in rows if rhs[r] / col[r] == theta]
            if bland:
                return min(ties, key=lambda r: self.basis[r]), theta
            return min(ties, key=lambda r: (-col[r], self.basis[r])), theta
        rows = np.flatnonzero(col > self.cfg.pivot_tolerance)
        if rows.size == 0:
            return None, None
        ratios = np.maximum(rhs[rows], 0.0) / col[rows]
        theta = ratios.min()
        ties = rows[ratios <= theta + 1e-12 * max(1.0, theta)]
        if bland:
            return int(ties[np.argmin(self.basis[ties])]), theta
        piv = col[ties]
        top = ties[piv >= piv.max() * (1 - 1e-9)]
        return int(top[np.argmin(self.basis[top])]), theta

    def _pivot(self, r, s):
        _kernels.pivot(self.T, r, s)
        self.basis[r], self.nonbasic[s] = self.nonbasic[s], self.basis[r]
        if not self.exact:
            rhs = self.T[: self.R, self.N]
            rhs[(rhs < 0) & (rhs > -self.cfg.feasibility_tolerance)] = 0.0
        self.iterations += 1

    def _optimize(self, obj_row):
        stall = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            s = self._entering(obj_row, bland)
            if s is None:
                return OPTIMAL
            r, theta = self._leaving(s, bland)
            if r is None:
                return UNBOUNDED
            self._pivot(r, s)
            if theta > self._tol(1e-12):
                stall = 0
                bland = False
            else:
                stall += 1
                if stall >= self.cfg.stall_limit:
                    bland = True

    # -- driver ---------------------------------------------------------------

    def run(self) -> LpSolution:
        R, N = self.R, self.N
        T = self.T
        if self.has_phase1:
            status = self._optimize(R + 1)
            if status == ITERATION_LIMIT:
                return LpSolution(ITERATION_LIMIT, None, math.nan, self.iterations)
            infeas = -T[R + 1, N]
            if infeas > self._tol(self.cfg.feasibility_tolerance):
                return LpSolution(INFEASIBLE, None, math.nan, self.iterations)
            self._drive_out_artificials()
        status = self._optimize(R)
        if status != OPTIMAL:
            return LpSolution(status, None, math.nan, self.iterations)
        return self._extract()

    def _drive_out_artificials(self):
        T, N = self.T, self.N
        for r in range(self.R):
            if not self.is_art[self.basis[r]]:
                continue
            row = T[r, :N]
            allowed = ~self.is_art[self.nonbasic]
            if self.exact:
                cand = [j for j in range(N) if allowed[j] and row[j] != 0]
            else:
                cand = list(np.flatnonzero(allowed & (np.abs(row) > self.cfg.pivot_tolerance)))
            if cand:
                s = max(cand, key=lambda j: (abs(row[j]), -self.nonbasic[j]))
                self._pivot(r, s)
            else:
                # redundant row: zero it so it never takes part in a ratio test
                T[r, :] = 0

    def _extract(self) -> LpSolution:
        T, N = self.T, self.N
        xprime = np.zeros(self.ns, dtype=object if self.exact else float)
        if self.exact:
            xprime[:] = Fraction(0)
        for r in range(self.R):
            v = self.basis[r]
            if v < self.ns:
                xprime[v] = T[r, N]
        x = self.offset.copy()
        for p, (j, sign) in enumerate(self.cols):
            x[j] += sign * float(xprime[p])
        objective = float(-T[self.R, N]) + self.const
        return LpSolution(OPTIMAL, x, objective, self.iterations)
