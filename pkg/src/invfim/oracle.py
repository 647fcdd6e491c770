"""Exact answers at toy scale, and hard instances from graph 3-coloring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from invfim import _kernels
from invfim.model import (
    ConstraintSet,
    InputError,
    ItemSet,
    ItemUniverse,
    SupportConstraint,
    TransactionDatabase,
)

MAX_T = 4
MAX_N = 10
MODELS = ("overshoot", "absolute")


class ScaleError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class OracleResult:
    optimum: float
    witness: tuple[int, ...] | None
    model: str

    def database(self, t: int) -> TransactionDatabase:
        """Rows in type order: ``witness[a]`` copies of the itemset with mask a."""
        if self.witness is None:
            raise InputError("no admissible database")
        rows = []
        for a, c in enumerate(self.witness):
            rows.extend([ItemSet.from_mask(a, t)] * c)
        return TransactionDatabase.from_itemsets(ItemUniverse(t), rows)


def _guard(cs: ConstraintSet) -> None:
    if cs.t > MAX_T or cs.n > MAX_N:
        raise ScaleError(f"oracle limited to t <= {MAX_T}, n <= {MAX_N}; got t={cs.t}, n={cs.n}")


def _hits(cs: ConstraintSet) -> np.ndarray:
    I = [c.itemset.mask for c in cs.constraints]
    return np.array(
        [[int(a & q == q) for q in I] for a in range(1 << cs.t)], dtype=np.int64
    )


def _score(supports, targets, model):
    total = 0
    for a, s in zip(supports, targets):
        d = a - s
        if d < 0:
            if model == "overshoot":
                return None
            d = -d
        total += d
    return total


def brute_force_optimum(cs: ConstraintSet, model: str = "overshoot") -> OracleResult:
    """Minimum total deviation over every database of exactly n rows.

    ``overshoot`` admits only databases with every support >= its target and
    sums the excess; ``absolute`` sums |support - target|. The witness is the
    lexicographically smallest optimal count vector over the 2^t row types.
    """
    if model not in MODELS:
        raise InputError(f"unknown model {model!r}; choose from {MODELS}")
    _guard(cs)
    best, witness = _kernels.enumerate_counts(
        _hits(cs), cs.supports, cs.n, model == "absolute"
    )
    return OracleResult(float(best), witness, model)


def count_vectors(types: int, n: int) -> Iterator[tuple[int, ...]]:
    """All nonnegative integer vectors of length ``types`` summing to ``n``, lexicographically."""
    if types == 1:
        yield (n,)
        return
    for c in range(n + 1):
        for rest in count_vectors(types - 1, n - c):
            yield (c,) + rest


def optimal_witnesses(cs: ConstraintSet, model: str = "absolute", objective: float = 0):
    """Every count vector whose deviation equals ``objective`` (default: exact fits)."""
    _guard(cs)
    hits = _hits(cs)
    for vec in count_vectors(1 << cs.t, cs.n):
        sup = np.asarray(vec) @ hits
        if _score(sup, cs.supports, model) == objective:
            yield vec


# -- 3-coloring reduction ----------------------------------------------------

COLORS = "RGB"


@dataclass(frozen=True)
class Graph:
    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        norm = []
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise InputError(f"edge ({u}, {v}) outside {self.vertex_count} vertices")
            if u == v:
                raise InputError(f"self-loop at vertex {u}")
            e = (min(u, v), max(u, v))
            if e in seen:
                raise InputError(f"duplicate edge {e}")
            seen.add(e)
            norm.append(e)
        object.__setattr__(self, "edges", tuple(norm))

    @classmethod
    def from_edges(cls, edges: Sequence[tuple[int, int]], vertex_count: int | None = None):
        if vertex_count is None:
            vertex_count = max((max(e) for e in edges), default=-1) + 1
        return cls(vertex_count, tuple(edges))


def color_item(v: int, color: str) -> int:
    return 3 * v + COLORS.index(color)


def third(n: int) -> int:
    """n/3 rounded to nearest (exact halves cannot occur)."""
    return (n + 1) // 3


def reduce_3coloring(g: Graph, k0: int = 1) -> ConstraintSet:
    """Constraint set that is approximately satisfiable iff ``g`` is 3-colorable.

    Items are R_v, G_v, B_v for every vertex (ids 3v, 3v+1, 3v+2).
    """
    if k0 < 1:
        raise InputError(f"k0 must be >= 1, got {k0}")
    if g.vertex_count < 1:
        raise InputError("graph needs at least one vertex")
    m = 6 * g.vertex_count + 3 * len(g.edges)
    n = k0 * m * m
    t = 3 * g.vertex_count
    labels = tuple(f"{c}{v}" for v in range(g.vertex_count) for c in COLORS)
    share = third(n)

    def cons(items, s):
        return SupportConstraint(ItemSet.from_items(sorted(items), t), s)

    out = []
    for v in range(g.vertex_count):
        r, gr, b = (color_item(v, c) for c in COLORS)
        out += [cons([r], share), cons([gr], share), cons([b], share)]
        out += [cons([r, gr], 0), cons([r, b], 0), cons([gr, b], 0)]
    for u, v in g.edges:
        for c in COLORS:
            out.append(cons([color_item(u, c), color_item(v, c)], 0))
    return ConstraintSet(ItemUniverse(t, labels), n, tuple(out))


def coloring_to_database(g: Graph, coloring: Sequence[str], n: int) -> TransactionDatabase:
    """Three cyclic recolorings of ``coloring``, n // 3 copies each, remainder on the first."""
    coloring = [str(c).upper() for c in coloring]
    if len(coloring) != g.vertex_count or any(c not in COLORS for c in coloring):
        raise InputError("coloring must give one of R, G, B per vertex")
    for u, v in g.edges:
        if coloring[u] == coloring[v]:
            raise InputError(f"improper coloring: edge ({u}, {v}) is monochrome")
    t = 3 * g.vertex_count
    transactions = []
    for shift in range(3):
        items = [color_item(v, COLORS[(COLORS.index(c) + shift) % 3]) for v, c in enumerate(coloring)]
        transactions.append(ItemSet.from_items(sorted(items), t))
    each, extra = divmod(n, 3)
    rows = [transactions[0]] * (each + extra) + [transactions[1]] * each + [transactions[2]] * each
    labels = tuple(f"{c}{v}" for v in range(g.vertex_count) for c in COLORS)
    return TransactionDatabase.from_itemsets(ItemUniverse(t, labels), rows)
