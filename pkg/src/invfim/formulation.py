"""Integer program over m+1 candidate itemsets, and its LP relaxation.

Columns, in fixed order:

* ``u_j_k``  item k belongs to candidate J_j (binary, relaxed to [0, 1])
* ``X_j``    copies of J_j in the database
* ``xx_i_j`` copies of J_j that contain I_i, i.e. X_j * y_i_j
* ``y_i_j``  I_i is a subset of J_j (binary, relaxed to [0, 1])
* ``z_i``    overshoot of constraint i

Indices are 1-based in names and :class:`VarRef`, 0-based in :class:`Layout`.
Single-variable bound rows are kept as explicit rows so the row count matches
the usual tally (subset rows and u bounds, four product rows per (i, j), the
size/support equalities and the z, X sign rows); y bounds live on the columns
only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from invfim.model import ConstraintSet, DimensionError, ItemSet

LE, EQ, GE = "<=", "=", ">="


@dataclass(frozen=True)
class VarRef:
    kind: str  # U, X, XX, Y, Z
    indices: tuple[int, ...]

    @property
    def name(self) -> str:
        prefix = {"U": "u", "X": "X", "XX": "xx", "Y": "y", "Z": "z"}[self.kind]
        return "_".join([prefix, *map(str, self.indices)])


@dataclass(frozen=True)
class Row:
    cols: tuple[int, ...]
    coefs: tuple[float, ...]
    rel: str
    rhs: float
    group: str


@dataclass(frozen=True)
class Layout:
    """Column index arithmetic for a model with m constraints over t items."""

    m: int
    t: int

    @property
    def n_candidates(self) -> int:
        return self.m + 1

    def u(self, j: int, k: int) -> int:
        return j * self.t + k

    def X(self, j: int) -> int:
        return self.t * (self.m + 1) + j

    def xx(self, i: int, j: int) -> int:
        return (self.t + 1) * (self.m + 1) + i * (self.m + 1) + j

    def y(self, i: int, j: int) -> int:
        return (self.t + 1 + self.m) * (self.m + 1) + i * (self.m + 1) + j

    def z(self, i: int) -> int:
        return (self.t + 1 + 2 * self.m) * (self.m + 1) + i

    @property
    def n_columns(self) -> int:
        return self.t * (self.m + 1) + 2 * self.m**2 + 4 * self.m + 1

    def varrefs(self) -> list[VarRef]:
        M = self.m + 1
        refs = [VarRef("U", (j + 1, k + 1)) for j in range(M) for k in range(self.t)]
        refs += [VarRef("X", (j + 1,)) for j in range(M)]
        refs += [VarRef("XX", (i + 1, j + 1)) for i in range(self.m) for j in range(M)]
        refs += [VarRef("Y", (i + 1, j + 1)) for i in range(self.m) for j in range(M)]
        refs += [VarRef("Z", (i + 1,)) for i in range(self.m)]
        return refs

    # views into a solution vector
    def U_matrix(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return v[: self.t * (self.m + 1)].reshape(self.m + 1, self.t)

    def X_vector(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return v[self.X(0): self.X(0) + self.m + 1]

    def XX_matrix(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        start = self.xx(0, 0)
        return v[start: start + self.m * (self.m + 1)].reshape(self.m, self.m + 1)

    def Y_matrix(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        start = self.y(0, 0)
        return v[start: start + self.m * (self.m + 1)].reshape(self.m, self.m + 1)

    def Z_vector(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return v[self.z(0): self.z(0) + self.m]


def expected_columns(m: int, t: int) -> int:
    return t * (m + 1) + 2 * m * m + 4 * m + 1


def expected_rows(m: int, t: int) -> int:
    return 6 * m * m + 9 * m + m * t + t + 2


@dataclass(frozen=True)
class LpModel:
    columns: tuple[VarRef, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    rows: tuple[Row, ...]
    objective: tuple[float, ...]
    layout: Layout
    n: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def dense(self):
        """(A, b, relations) with one matrix row per model row."""
        A = np.zeros((self.n_rows, self.n_columns))
        for r, row in enumerate(self.rows):
            A[r, list(row.cols)] = row.coefs
        b = np.array([row.rhs for row in self.rows], dtype=float)
        return A, b, [row.rel for row in self.rows]

    def residuals(self, values) -> np.ndarray:
        """Per-row violation (0 when the row holds), bounds excluded."""
        x = np.asarray(values, dtype=float)
        out = np.empty(self.n_rows)
        for r, row in enumerate(self.rows):
            lhs = float(np.dot(x[list(row.cols)], row.coefs))
            if row.rel == LE:
                out[r] = max(0.0, lhs - row.rhs)
            elif row.rel == GE:
                out[r] = max(0.0, row.rhs - lhs)
            else:
                out[r] = abs(lhs - row.rhs)
        return out

    def to_text(self) -> str:
        names = [c.name for c in self.columns]

        def term(c, name):
            return f"{_num(c)}*{name}"

        lines = ["minimize " + " + ".join(
            term(c, names[j]) for j, c in enumerate(self.objective) if c
        )]
        for row in self.rows:
            lhs = " + ".join(term(c, names[j]) for j, c in zip(row.cols, row.coefs))
            lines.append(f"{lhs} {row.rel} {_num(row.rhs)}")
        for name, lo, hi in zip(names, self.lower, self.upper):
            hi_txt = "inf" if math.isinf(hi) else _num(hi)
            lines.append(f"bound {_num(lo)} <= {name} <= {hi_txt}")
        return "\n".join(lines) + "\n"


def _num(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else repr(v)


def _formulate(
    itemsets: Sequence[ItemSet],
    targets: Sequence[int],
    n: int,
    t: int,
    *,
    objective_rows: int | None = None,
    z_bounds: dict[int, tuple[float, float]] | None = None,
) -> LpModel:
    m = len(itemsets)
    L = Layout(m, t)
    M = m + 1
    cols = tuple(L.varrefs())
    lower = [0.0] * L.n_columns
    upper = [math.inf] * L.n_columns
    for j in range(M):
        for k in range(t):
            upper[L.u(j, k)] = 1.0
        for i in range(m):
            upper[L.y(i, j)] = 1.0
    for i, (lo, hi) in (z_bounds or {}).items():
        lower[L.z(i)], upper[L.z(i)] = float(lo), float(hi)

    rows: list[Row] = []
    # subset indicator: |I| y <= sum_{k in I} u_jk <= y + |I| - 1
    for j in range(M):
        for i, I in enumerate(itemsets):
            us = tuple(L.u(j, k) for k in I.items)
            size = len(I.items)
            rows.append(Row((L.y(i, j),) + us, (float(size),) + (-1.0,) * size, LE, 0.0, "subset-lo"))
            rows.append(Row(us + (L.y(i, j),), (1.0,) * size + (-1.0,), LE, size - 1.0, "subset-hi"))
        for k in range(t):
            rows.append(Row((L.u(j, k),), (1.0,), LE, 1.0, "u-bound"))
    # product x = X * y
    for i in range(m):
        for j in range(M):
            x, y, X = L.xx(i, j), L.y(i, j), L.X(j)
            rows.append(Row((x, y), (1.0, -float(n)), LE, 0.0, "product-zero"))
            rows.append(Row((X, x), (1.0, -1.0), GE, 0.0, "product-le"))
            rows.append(Row((y, X, x), (float(n), 1.0, -1.0), LE, float(n), "product-ge"))
            rows.append(Row((x,), (1.0,), GE, 0.0, "x-nonneg"))
    rows.append(Row(tuple(L.X(j) for j in range(M)), (1.0,) * M, EQ, float(n), "size"))
    for i in range(m):
        xs = tuple(L.xx(i, j) for j in range(M))
        rows.append(Row(xs + (L.z(i),), (1.0,) * M + (-1.0,), EQ, float(targets[i]), "support"))
    for i in range(m):
        rows.append(Row((L.z(i),), (1.0,), GE, 0.0, "z-nonneg"))
    for j in range(M):
        rows.append(Row((L.X(j),), (1.0,), GE, 0.0, "X-nonneg"))

    k_obj = m if objective_rows is None else objective_rows
    objective = [0.0] * L.n_columns
    for i in range(k_obj):
        objective[L.z(i)] = 1.0
    return LpModel(cols, tuple(lower), tuple(upper), tuple(rows), tuple(objective), L, n)


def build_relaxed_lp(cs: ConstraintSet) -> LpModel:
    """Continuous relaxation of the candidate-itemset program for ``cs``."""
    return _formulate(cs.itemsets, cs.supports, cs.n, cs.t)


def build_audit_lp(
    cs: ConstraintSet, itemset: ItemSet, lo: int, hi: int
) -> LpModel:
    """Relaxation of ``cs`` plus a free support variable for ``itemset``.

    The extra constraint is the (m+1)-th with target 0, so its ``z`` column
    equals support(itemset); it is boxed to [lo, hi] and left out of the
    objective. The model therefore has m+2 candidate itemsets.
    """
    if itemset.t != cs.t:
        raise DimensionError(f"itemset t={itemset.t}, constraints t={cs.t}")
    itemsets = cs.itemsets + [itemset]
    targets = cs.supports + [0]
    return _formulate(
        itemsets, targets, cs.n, cs.t, objective_rows=cs.m, z_bounds={cs.m: (lo, hi)}
    )


def assignment_from_database(cs: ConstraintSet, itemsets: Sequence[ItemSet], counts: Sequence[int]):
    """Integer column vector for candidates ``itemsets`` with multiplicities ``counts``.

    Needs exactly m+1 candidates (pad with zero-count duplicates if fewer).
    """
    m, t = cs.m, cs.t
    L = Layout(m, t)
    if len(itemsets) != m + 1 or len(counts) != m + 1:
        raise DimensionError(f"need {m + 1} candidates, got {len(itemsets)}")
    v = [0] * L.n_columns
    for j, J in enumerate(itemsets):
        for k in J.items:
            v[L.u(j, k)] = 1
        v[L.X(j)] = int(counts[j])
    for i, I in enumerate(cs.itemsets):
        total = 0
        for j, J in enumerate(itemsets):
            y = int(I.mask & J.mask == I.mask)
            v[L.y(i, j)] = y
            v[L.xx(i, j)] = y * int(counts[j])
            total += y * int(counts[j])
        v[L.z(i)] = total - cs.supports[i]
    return v


def integral_feasible(cs: ConstraintSet, assignment: Sequence) -> bool:
    """Does ``assignment`` satisfy the integer program exactly?"""
    L = Layout(cs.m, cs.t)
    if len(assignment) != L.n_columns:
        raise DimensionError(f"assignment has {len(assignment)} values, model has {L.n_columns}")
    vals = [Fraction(v) for v in assignment]
    if any(v.denominator != 1 for v in vals):
        return False
    M = cs.m + 1
    binaries = [L.u(j, k) for j in range(M) for k in range(cs.t)]
    binaries += [L.y(i, j) for i in range(cs.m) for j in range(M)]
    if any(vals[c] not in (0, 1) for c in binaries):
        return False
    nonneg = [L.X(j) for j in range(M)] + [L.z(i) for i in range(cs.m)]
    nonneg += [L.xx(i, j) for i in range(cs.m) for j in range(M)]
    if any(vals[c] < 0 for c in nonneg):
        return False
    model = build_relaxed_lp(cs)
    for row in model.rows:
        lhs = sum(vals[c] * Fraction(a) for c, a in zip(row.cols, row.coefs))
        rhs = Fraction(row.rhs)
        if row.rel == LE and lhs > rhs:
            return False
        if row.rel == GE and lhs < rhs:
            return False
        if row.rel == EQ and lhs != rhs:
            return False
    return True
