"""Turn a relaxed optimum into candidate itemsets J_j with integer counts.

Two naive roundings (on ``u`` and on ``x``), their randomized versions, and
derandomized versions that fix one variable at a time by comparing the
conditional expectation of the objective under both values.

Derandomization can score branches with two objectives:

``"signed"``    sum_i E[z_i] with E[z_i] = sum_j X_j Prob[I_i in J_j] - s_i.
                Linear in the probabilities, but it always prefers the
                smaller J_j, so on its own it drifts towards empty rows.
``"absolute"``  sum_i E|support_i - s_i|. For a fixed i the indicators
                [I_i in J_j] of different columns are independent, so the
                distribution of support_i is an exact convolution over j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from invfim.formulation import Layout
from invfim.model import ConstraintSet, InputError, ItemSet, ItemUniverse, TransactionDatabase
from invfim.simplex import LpSolution

METHODS = ("round-u", "round-x", "random-x", "random-u", "derandom-x", "derandom-u")
OBJECTIVES = ("absolute", "signed")
ORDERS = ("row-major", "column-major")

EXACT_COVER_POOL = 15
TRUNCATED_COVER_SIZE = 3
HALF = 0.5 - 1e-9


@dataclass(frozen=True)
class StepRecord:
    variable: tuple[int, int]
    expect_zero: float
    expect_one: float
    chosen: int

    @property
    def chosen_expectation(self) -> float:
        return self.expect_one if self.chosen else self.expect_zero

    @property
    def other_expectation(self) -> float:
        return self.expect_zero if self.chosen else self.expect_one


@dataclass(frozen=True, eq=False)
class RoundedSolution:
    itemsets: tuple[ItemSet, ...]
    counts: tuple[int, ...]
    ybar: np.ndarray
    xbar: np.ndarray
    zbar: np.ndarray
    method: str = ""
    selected: np.ndarray | None = None
    initial_expectation: float | None = None
    objective_kind: str | None = None
    trace: tuple[StepRecord, ...] = ()

    @property
    def realized_objective(self) -> float:
        return float(self.zbar.sum())

    @property
    def abs_objective(self) -> float:
        return float(np.abs(self.zbar).sum())

    def objective(self, kind: str) -> float:
        return self.abs_objective if kind == "absolute" else self.realized_objective


def _finalize(cs: ConstraintSet, masks: Sequence[int], counts, **extra) -> RoundedSolution:
    t = cs.t
    counts = np.asarray(counts, dtype=np.int64)
    I = [c.itemset.mask for c in cs.constraints]
    ybar = np.array([[int(a & J == a) for J in masks] for a in I], dtype=np.int64)
    ybar = ybar.reshape(cs.m, len(masks))
    xbar = ybar * counts[None, :]
    zbar = xbar.sum(axis=1) - np.asarray(cs.supports, dtype=np.int64)
    return RoundedSolution(
        tuple(ItemSet.from_mask(J, t) for J in masks),
        tuple(int(c) for c in counts),
        ybar,
        xbar,
        zbar,
        **extra,
    )


def _decode(ostar: LpSolution, cs: ConstraintSet):
    if not ostar.optimal or ostar.values is None:
        raise InputError(f"rounding needs an optimal relaxation, got {ostar.status}")
    L = Layout(cs.m, cs.t)
    if len(ostar.values) != L.n_columns:
        raise InputError(f"solution has {len(ostar.values)} values, model needs {L.n_columns}")
    U = np.clip(L.U_matrix(ostar.values), 0.0, 1.0)
    X = np.maximum(L.X_vector(ostar.values), 0.0)
    XX = np.maximum(L.XX_matrix(ostar.values), 0.0)
    return U, X, XX


# -- count balancing ---------------------------------------------------------


def _balance(xstar, n: int, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(xstar, dtype=float)
    if n < 0:
        raise InputError(f"n must be >= 0, got {n}")
    if np.any(x < -1e-9):
        raise InputError("counts to balance must be nonnegative")
    out = np.maximum(np.floor(x + 0.5), 0).astype(np.int64)
    diff = int(out.sum()) - n
    while diff > 0:
        pool = np.flatnonzero((out > 0) & (out > x))
        if pool.size == 0:
            pool = np.flatnonzero(out > 0)
        j = rng.choice(pool)
        out[j] -= 1
        diff -= 1
    while diff < 0:
        pool = np.flatnonzero(out < x)
        if pool.size == 0:
            pool = np.arange(out.size)
        j = rng.choice(pool)
        out[j] += 1
        diff += 1
    return out


def balance_counts(xstar, n: int, seed: int = 0) -> np.ndarray:
    """Round to nearest, then add/remove single copies at random until the sum is n.

    Removals go to entries that were rounded up and additions to entries that
    were rounded down while such entries exist.
    """
    return _balance(xstar, n, np.random.default_rng(seed))


# -- spreading ---------------------------------------------------------------


def split_parts(total: int, k: int) -> list[int]:
    """Split ``total`` into ``k`` positive parts with many distinct subset sums.

    Each part is at most one more than the sum of the parts before it, so
    every integer up to the running sum stays reachable, and parts grow
    towards an even share of what is left.
    """
    if k < 1 or total < k:
        raise InputError(f"cannot split {total} into {k} positive parts")
    parts = []
    done = 0
    for i in range(k):
        left = k - i
        if left == 1:
            parts.append(total - done)
            break
        share = (total - done) // left
        p = max(1, min(share, done + 1))
        parts.append(p)
        done += p
    return parts


def split_fractions(x: float, k: int) -> list[float]:
    """Fractions summing to 1 that split a count ``x`` into ``k`` slots."""
    whole = int(round(x))
    if whole < k:
        return [1.0 / k] * k
    return [p / whole for p in split_parts(whole, k)]


def spread_solution(ostar: LpSolution, cs: ConstraintSet) -> LpSolution:
    """Another optimal point of the same relaxation, using every candidate slot.

    A vertex optimum typically loads all n copies onto one or two candidates,
    and rounding then yields a few identical row blocks. Copying a used
    column's ``u`` and ``y`` into idle slots and splitting its ``X`` and ``x``
    in the same proportions keeps every row satisfied (the subset rows do not involve X or x,
    and the product rows are preserved under scaling by a factor <= 1), so
    the objective is unchanged.
    """
    if not ostar.optimal or ostar.values is None:
        raise InputError(f"can only spread an optimal solution, got {ostar.status}")
    L = Layout(cs.m, cs.t)
    v = np.array(ostar.values, dtype=float, copy=True)
    M = cs.m + 1
    X = L.X_vector(v).copy()
    used = [j for j in range(M) if X[j] > 1e-9]
    if not used or len(used) == M:
        return ostar
    # slots per used column: largest remainder on X, at least one each
    share = X[used] / X[used].sum() * M
    slots = np.maximum(np.floor(share).astype(int), 1)
    while slots.sum() > M:
        slots[np.argmax(slots)] -= 1
    rest = share - slots
    for idx in np.argsort(-rest, kind="stable")[: M - slots.sum()]:
        slots[idx] += 1
    out = np.zeros_like(v)
    out[L.z(0): L.z(0) + cs.m] = L.Z_vector(v)
    target = 0
    for j, k in zip(used, slots):
        for f in split_fractions(X[j], int(k)):
            for kk in range(cs.t):
                out[L.u(target, kk)] = v[L.u(j, kk)]
            out[L.X(target)] = X[j] * f
            for i in range(cs.m):
                out[L.y(i, target)] = v[L.y(i, j)]
                out[L.xx(i, target)] = v[L.xx(i, j)] * f
            target += 1
    return LpSolution(ostar.status, out, ostar.objective, ostar.iterations)


# -- naive rounding ----------------------------------------------------------


def _masks_from_u(ubar) -> list[int]:
    return [sum(1 << k for k in np.flatnonzero(row)) for row in ubar]


def _union_selected(cs: ConstraintSet, sel: np.ndarray) -> list[int]:
    I = [c.itemset.mask for c in cs.constraints]
    masks = []
    for j in range(sel.shape[1]):
        J = 0
        for i in np.flatnonzero(sel[:, j]):
            J |= I[i]
        masks.append(J)
    return masks


def round_method1(ostar: LpSolution, cs: ConstraintSet, seed: int = 0) -> RoundedSolution:
    U, X, _ = _decode(ostar, cs)
    counts = balance_counts(X, cs.n, seed)
    return _finalize(cs, _masks_from_u(U >= HALF), counts, method="round-u")


def round_method2(ostar: LpSolution, cs: ConstraintSet, seed: int = 0) -> RoundedSolution:
    _, X, XX = _decode(ostar, cs)
    counts = balance_counts(X, cs.n, seed)
    sel = (counts[None, :] > 0) & (XX >= HALF * counts[None, :])
    return _finalize(cs, _union_selected(cs, sel), counts, method="round-x", selected=sel)


def _x_probabilities(XX, counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(counts[None, :] > 0, XX / np.where(counts > 0, counts, 1.0)[None, :], 0.0)
    return np.clip(q, 0.0, 1.0)


def randomized_round_x(ostar: LpSolution, cs: ConstraintSet, seed: int = 0) -> RoundedSolution:
    _, X, XX = _decode(ostar, cs)
    rng = np.random.default_rng(seed)
    counts = _balance(X, cs.n, rng)
    q = _x_probabilities(XX, counts)
    sel = rng.random(q.shape) < q
    return _finalize(cs, _union_selected(cs, sel), counts, method="random-x", selected=sel)


def randomized_round_u(ostar: LpSolution, cs: ConstraintSet, seed: int = 0) -> RoundedSolution:
    U, X, _ = _decode(ostar, cs)
    rng = np.random.default_rng(seed)
    counts = _balance(X, cs.n, rng)
    ubar = rng.random(U.shape) < U
    return _finalize(cs, _masks_from_u(ubar), counts, method="random-u")


# -- subset probabilities ----------------------------------------------------


class ProbabilityContext:
    """Prob[I_i in J_j] while rounding x one entry at a time.

    ``determined`` maps (i, j) to the fixed draw (1: I_i was put into J_j).
    Undetermined entries start from ``x*_ij / X_j`` and pick up a correction
    for every minimal family of other undetermined constraint itemsets that
    would complete I_i on top of the items already committed to J_j.
    """

    def __init__(self, cs: ConstraintSet, counts, xstar, refine_rounds: int = 2):
        if refine_rounds < 0:
            raise InputError("refine_rounds must be >= 0")
        self.m = cs.m
        self.M = cs.m + 1
        self.masks = [c.itemset.mask for c in cs.constraints]
        self.counts = np.asarray(counts, dtype=np.int64)
        self.base = _x_probabilities(np.asarray(xstar, dtype=float), self.counts)
        self.refine_rounds = refine_rounds
        self.determined: dict[tuple[int, int], int] = {}
        self._cover_cache: dict = {}
        self.probs = np.zeros((self.m, self.M))
        self.refresh()

    def covered(self, j: int) -> int:
        J = 0
        for (i, jj), v in self.determined.items():
            if jj == j and v:
                J |= self.masks[i]
        return J

    def candidate_pool(self, i: int, j: int) -> list[int]:
        return [k for k in range(self.m) if k != i and (k, j) not in self.determined]

    def minimal_covers(self, i: int, j: int) -> list[tuple[int, ...]]:
        need = self.masks[i] & ~self.covered(j)
        pool = tuple(k for k in self.candidate_pool(i, j) if self.masks[k] & need)
        return _minimal_covers(need, pool, self.masks, self._cover_cache)

    def column(self, j: int) -> np.ndarray:
        J0 = self.covered(j)
        out = np.empty(self.m)
        fixed = np.ones(self.m, dtype=bool)
        base = np.empty(self.m)
        covers: dict[int, list[tuple[int, ...]]] = {}
        for i in range(self.m):
            if self.masks[i] & ~J0 == 0:
                out[i] = 1.0
                continue
            d = self.determined.get((i, j))
            base[i] = self.base[i, j] if d is None else float(d)
            covers[i] = self.minimal_covers(i, j)
            fixed[i] = False
        prev = np.where(fixed, out, self.base[:, j])
        for _ in range(1 + self.refine_rounds):
            cur = prev.copy()
            for i, fam in covers.items():
                corr = sum(math.prod(prev[k] for k in K) for K in fam)
                cur[i] = min(1.0, base[i] + (1.0 - base[i]) * corr)
            prev = cur
            if not covers or all(not fam for fam in covers.values()):
                break
        return np.clip(prev, 0.0, 1.0)

    def refresh(self) -> None:
        for j in range(self.M):
            self.probs[:, j] = self.column(j)

    def fix(self, var: tuple[int, int], value: int) -> None:
        self.determined[var] = int(value)

    def release(self, var: tuple[int, int]) -> None:
        self.determined.pop(var, None)

    @staticmethod
    def column_of(var: tuple[int, int]) -> int:
        return var[1]


def _minimal_covers(need: int, pool: tuple[int, ...], masks, cache) -> list[tuple[int, ...]]:
    key = (need, pool)
    hit = cache.get(key)
    if hit is not None:
        return hit
    limit = TRUNCATED_COVER_SIZE if len(pool) > EXACT_COVER_POOL else None
    found: set[tuple[int, ...]] = set()

    def search(remaining, chosen):
        if remaining == 0:
            found.add(tuple(sorted(chosen)))
            return
        if limit is not None and len(chosen) >= limit:
            return
        low = remaining & -remaining
        for k in pool:
            if masks[k] & low and k not in chosen:
                search(remaining & ~masks[k], chosen + (k,))

    if need:
        search(need, ())
    out = []
    for K in sorted(found, key=lambda K: (len(K), K)):
        minimal = True
        for drop in K:
            acc = 0
            for k in K:
                if k != drop:
                    acc |= masks[k]
            if need & ~acc == 0:
                minimal = False
                break
        if minimal:
            out.append(K)
    cache[key] = out
    return out


class UProbabilityContext:
    """Prob[I_i in J_j] as the product of the (fixed or fractional) u entries."""

    def __init__(self, cs: ConstraintSet, counts, ustar):
        self.m = cs.m
        self.M = cs.m + 1
        self.items = [c.itemset.items for c in cs.constraints]
        self.counts = np.asarray(counts, dtype=np.int64)
        self.uhat = np.array(ustar, dtype=float, copy=True)
        self.ustar = np.array(ustar, dtype=float, copy=True)
        self.determined: dict[tuple[int, int], int] = {}
        self.probs = np.zeros((self.m, self.M))
        self.refresh()

    def column(self, j: int) -> np.ndarray:
        row = self.uhat[j]
        return np.array([math.prod(row[k] for k in items) for items in self.items])

    def refresh(self) -> None:
        for j in range(self.M):
            self.probs[:, j] = self.column(j)

    def fix(self, var: tuple[int, int], value: int) -> None:
        self.determined[var] = int(value)
        self.uhat[var] = float(value)

    def release(self, var: tuple[int, int]) -> None:
        self.determined.pop(var, None)
        self.uhat[var] = self.ustar[var]

    @staticmethod
    def column_of(var: tuple[int, int]) -> int:
        return var[0]


def prob_subset(ctx: ProbabilityContext, i: int, j: int) -> float:
    return float(ctx.column(j)[i])


# -- expectations ------------------------------------------------------------


def _support_distribution(P, counts, n, skip=None) -> np.ndarray:
    """Row i: distribution of sum_j counts[j] * Bernoulli(P[i, j]) over 0..n."""
    m = P.shape[0]
    D = np.zeros((m, n + 1))
    D[:, 0] = 1.0
    for j, c in enumerate(counts):
        c = int(c)
        if j == skip or c == 0:
            continue
        p = P[:, j][:, None]
        shifted = np.zeros_like(D)
        shifted[:, c:] = D[:, : n + 1 - c]
        D = (1.0 - p) * D + p * shifted
    return D


def expected_objective(ctx, cs: ConstraintSet, kind: str = "signed") -> float:
    """Expected objective under the context's current probability table.

    ``kind="signed"`` gives sum_i (sum_j X_j P_ij - s_i), negative values
    included; ``kind="absolute"`` gives sum_i E|support_i - s_i|.
    """
    P = ctx.probs
    s = np.asarray(cs.supports, dtype=float)
    if kind == "signed":
        return float((P * ctx.counts[None, :]).sum() - s.sum())
    if kind != "absolute":
        raise InputError(f"unknown objective {kind!r}")
    n = int(ctx.counts.sum())
    D = _support_distribution(P, ctx.counts, n)
    dev = np.abs(np.arange(n + 1)[None, :] - s[:, None])
    return float((D * dev).sum())


class _ColumnScorer:
    """Full expected objective when only column j's probabilities vary."""

    def __init__(self, ctx, cs: ConstraintSet, j: int, kind: str):
        P = ctx.probs
        counts = ctx.counts
        s = np.asarray(cs.supports, dtype=float)
        self.kind = kind
        c = int(counts[j])
        if kind == "signed":
            rest = (P * counts[None, :]).sum() - (P[:, j] * c).sum() - s.sum()
            self.rest = rest
            self.c = c
            return
        n = int(counts.sum())
        D = _support_distribution(P, counts, n, skip=j)
        v = np.arange(n + 1)[None, :]
        self.e0 = (D * np.abs(v - s[:, None])).sum(axis=1)
        self.e1 = (D * np.abs(v + c - s[:, None])).sum(axis=1)

    def __call__(self, col: np.ndarray) -> float:
        if self.kind == "signed":
            return float(self.rest + self.c * col.sum())
        return float(((1.0 - col) * self.e0 + col * self.e1).sum())


def _derandomize(ctx, cs: ConstraintSet, variables, kind: str) -> tuple[float, list[StepRecord]]:
    if kind not in OBJECTIVES:
        raise InputError(f"unknown objective {kind!r}; choose from {OBJECTIVES}")
    initial = expected_objective(ctx, cs, kind)
    trace = []
    scorer_col = None
    scorer = None
    for var in variables:
        j = ctx.column_of(var)
        if scorer_col != j:
            scorer = _ColumnScorer(ctx, cs, j, kind)
            scorer_col = j
        ctx.fix(var, 0)
        col0 = ctx.column(j)
        ctx.fix(var, 1)
        col1 = ctx.column(j)
        e0, e1 = scorer(col0), scorer(col1)
        choice = 1 if e1 < e0 else 0
        ctx.fix(var, choice)
        ctx.probs[:, j] = col1 if choice else col0
        trace.append(StepRecord(tuple(int(v) for v in var), e0, e1, choice))
    return initial, trace


def _order(rows: int, cols: int, order: str):
    if order == "row-major":
        return [(a, b) for a in range(rows) for b in range(cols)]
    if order == "column-major":
        return [(a, b) for b in range(cols) for a in range(rows)]
    raise InputError(f"unknown order {order!r}; choose from {ORDERS}")


def derandomize_x(
    ostar: LpSolution,
    cs: ConstraintSet,
    refine_rounds: int = 2,
    *,
    seed: int = 0,
    objective: str = "absolute",
    order: str = "row-major",
) -> RoundedSolution:
    _, X, XX = _decode(ostar, cs)
    counts = balance_counts(X, cs.n, seed)
    ctx = ProbabilityContext(cs, counts, XX, refine_rounds)
    initial, trace = _derandomize(ctx, cs, _order(cs.m, cs.m + 1, order), objective)
    sel = np.zeros((cs.m, cs.m + 1), dtype=bool)
    for (i, j), v in ctx.determined.items():
        sel[i, j] = bool(v)
    return _finalize(
        cs,
        _union_selected(cs, sel),
        counts,
        method="derandom-x",
        selected=sel,
        initial_expectation=initial,
        objective_kind=objective,
        trace=tuple(trace),
    )


def derandomize_u(
    ostar: LpSolution,
    cs: ConstraintSet,
    *,
    seed: int = 0,
    objective: str = "absolute",
    order: str = "row-major",
) -> RoundedSolution:
    U, X, _ = _decode(ostar, cs)
    counts = balance_counts(X, cs.n, seed)
    ctx = UProbabilityContext(cs, counts, U)
    initial, trace = _derandomize(ctx, cs, _order(cs.m + 1, cs.t, order), objective)
    ubar = np.zeros_like(U, dtype=bool)
    for (j, k), v in ctx.determined.items():
        ubar[j, k] = bool(v)
    return _finalize(
        cs,
        _masks_from_u(ubar),
        counts,
        method="derandom-u",
        initial_expectation=initial,
        objective_kind=objective,
        trace=tuple(trace),
    )


def round_solution(
    method: str,
    ostar: LpSolution,
    cs: ConstraintSet,
    seed: int = 0,
    refine_rounds: int = 2,
    objective: str = "absolute",
) -> RoundedSolution:
    if method == "round-u":
        return round_method1(ostar, cs, seed)
    if method == "round-x":
        return round_method2(ostar, cs, seed)
    if method == "random-x":
        return randomized_round_x(ostar, cs, seed)
    if method == "random-u":
        return randomized_round_u(ostar, cs, seed)
    if method == "derandom-x":
        return derandomize_x(ostar, cs, refine_rounds, seed=seed, objective=objective)
    if method == "derandom-u":
        return derandomize_u(ostar, cs, seed=seed, objective=objective)
    raise InputError(f"unknown rounding method {method!r}; choose from {METHODS}")


def build_database(sol: RoundedSolution, universe: ItemUniverse) -> TransactionDatabase:
    rows = []
    for J, c in zip(sol.itemsets, sol.counts):
        if J.t != universe.t:
            raise InputError(f"candidate itemset over t={J.t}, universe t={universe.t}")
        rows.extend([J] * c)
    return TransactionDatabase.from_itemsets(universe, rows)


def enumerate_branches(ctx, cs, variables, kind="absolute"):
    """Expected objective of every full 0/1 completion of ``variables``.

    Test helper: brute force over both values of each listed variable, used
    to cross-check a single derandomization step.
    """
    out = {}
    for values in product((0, 1), repeat=len(variables)):
        for var, v in zip(variables, values):
            ctx.fix(var, v)
        saved = ctx.probs.copy()
        ctx.refresh()
        out[values] = expected_objective(ctx, cs, kind)
        ctx.probs[:] = saved
        for var in variables:
            ctx.release(var)
    return out
