"""Item universes, itemsets, transaction databases and support constraints.

Itemsets are characteristic arrays over a fixed universe of ``t`` items.
Everything here is immutable; the support/frequency helpers are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from invfim import _kernels


class DimensionError(ValueError):
    """Two objects live over universes of different size."""


class InputError(ValueError):
    """Malformed or inconsistent user input."""


class UndefinedFrequencyError(ZeroDivisionError):
    """Frequency requested over an empty database."""


@dataclass(frozen=True)
class ItemUniverse:
    t: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.t < 1:
            raise InputError(f"universe needs t >= 1, got {self.t}")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != self.t:
                raise InputError(f"{len(self.labels)} labels for {self.t} items")

    def label(self, k: int) -> str:
        return self.labels[k] if self.labels else f"e{k + 1}"


@dataclass(frozen=True)
class ItemSet:
    """An itemset stored as its characteristic array ``chi``."""

    chi: tuple[int, ...]

    def __post_init__(self):
        chi = tuple(int(v) for v in self.chi)
        if any(v not in (0, 1) for v in chi):
            raise InputError(f"characteristic array must be binary: {self.chi}")
        object.__setattr__(self, "chi", chi)

    @classmethod
    def from_items(cls, items: Iterable[int], t: int) -> "ItemSet":
        chi = [0] * t
        for k in items:
            if not 0 <= k < t:
                raise InputError(f"item id {k} outside universe of {t} items")
            chi[k] = 1
        return cls(tuple(chi))

    @classmethod
    def from_mask(cls, mask: int, t: int) -> "ItemSet":
        if mask >> t:
            raise InputError(f"mask {mask:#x} has bits beyond t={t}")
        return cls(tuple((mask >> k) & 1 for k in range(t)))

    @classmethod
    def empty(cls, t: int) -> "ItemSet":
        return cls((0,) * t)

    @property
    def t(self) -> int:
        return len(self.chi)

    @cached_property
    def items(self) -> tuple[int, ...]:
        return tuple(k for k, v in enumerate(self.chi) if v)

    @cached_property
    def mask(self) -> int:
        m = 0
        for k, v in enumerate(self.chi):
            if v:
                m |= 1 << k
        return m

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __or__(self, other: "ItemSet") -> "ItemSet":
        _check_same(self, other)
        return ItemSet.from_mask(self.mask | other.mask, self.t)

    def __and__(self, other: "ItemSet") -> "ItemSet":
        _check_same(self, other)
        return ItemSet.from_mask(self.mask & other.mask, self.t)

    def sort_key(self) -> tuple:
        return (len(self), self.items)

    def __str__(self) -> str:
        return "{" + ",".join(f"e{k + 1}" for k in self.items) + "}"


def _check_same(a: ItemSet, b: ItemSet) -> None:
    if a.t != b.t:
        raise DimensionError(f"universe mismatch: t={a.t} vs t={b.t}")


def inner_product(a: ItemSet, b: ItemSet) -> int:
    _check_same(a, b)
    return sum(x * y for x, y in zip(a.chi, b.chi))


def is_subset(a: ItemSet, b: ItemSet) -> bool:
    return inner_product(a, b) == len(a)


@dataclass(frozen=True)
class Transaction:
    tid: int
    items: ItemSet


@dataclass(frozen=True)
class TransactionDatabase:
    universe: ItemUniverse
    rows: tuple[Transaction, ...]
    comments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        seen = set()
        for row in self.rows:
            if row.items.t != self.universe.t:
                raise DimensionError(
                    f"transaction {row.tid} has t={row.items.t}, universe t={self.universe.t}"
                )
            if row.tid in seen:
                raise InputError(f"duplicate tid {row.tid}")
            seen.add(row.tid)

    @classmethod
    def from_itemsets(
        cls, universe: ItemUniverse, itemsets: Iterable[ItemSet], comments: Sequence[str] = ()
    ) -> "TransactionDatabase":
        rows = tuple(Transaction(tid, s) for tid, s in enumerate(itemsets, start=1))
        return cls(universe, rows, tuple(comments))

    @classmethod
    def from_lists(cls, lists: Iterable[Iterable[int]], t: int) -> "TransactionDatabase":
        return cls.from_itemsets(ItemUniverse(t), (ItemSet.from_items(r, t) for r in lists))

    def __len__(self) -> int:
        return len(self.rows)

    @cached_property
    def masks(self) -> list[int]:
        return [row.items.mask for row in self.rows]

    def with_rows(self, itemsets: Iterable[ItemSet]) -> "TransactionDatabase":
        return TransactionDatabase.from_itemsets(self.universe, itemsets, self.comments)


@dataclass(frozen=True)
class SupportConstraint:
    itemset: ItemSet
    support: int


@dataclass(frozen=True)
class ConstraintSet:
    """An instance: target size ``n`` and ``m`` pairs (I_i, s_i).

    ``lineage`` marks sets produced by :func:`invfim.privacy.scrub_constraints`.
    """

    universe: ItemUniverse
    n: int
    constraints: tuple[SupportConstraint, ...]
    comments: tuple[str, ...] = field(default=(), compare=False)
    lineage: str | None = field(default=None, compare=False)
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.n < 1:
            raise InputError(f"n must be >= 1, got {self.n}")
        if not self.constraints:
            raise InputError("a constraint set needs at least one constraint")
        seen = set()
        for c in self.constraints:
            if c.itemset.t != self.universe.t:
                raise DimensionError(f"constraint {c.itemset} not over t={self.universe.t}")
            if not self.check:
                continue
            if len(c.itemset) == 0:
                raise InputError("empty constraint itemset")
            if not 0 <= c.support <= self.n:
                raise InputError(f"support {c.support} of {c.itemset} outside [0, {self.n}]")
            if c.itemset.mask in seen:
                raise InputError(f"duplicate constraint itemset {c.itemset}")
            seen.add(c.itemset.mask)

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def t(self) -> int:
        return self.universe.t

    @property
    def itemsets(self) -> list[ItemSet]:
        return [c.itemset for c in self.constraints]

    @property
    def supports(self) -> list[int]:
        return [c.support for c in self.constraints]

    @classmethod
    def from_pairs(
        cls, t: int, n: int, pairs: Iterable[tuple[Iterable[int], int]], **kw
    ) -> "ConstraintSet":
        cons = tuple(SupportConstraint(ItemSet.from_items(items, t), s) for items, s in pairs)
        return cls(ItemUniverse(t), n, cons, **kw)


def support(itemset: ItemSet, db: TransactionDatabase) -> int:
    if itemset.t != db.universe.t:
        raise DimensionError(f"itemset t={itemset.t}, database t={db.universe.t}")
    return int(_kernels.support_counts(db.masks, [itemset.mask], db.universe.t)[0])


def supports(itemsets: Sequence[ItemSet], db: TransactionDatabase) -> list[int]:
    for s in itemsets:
        if s.t != db.universe.t:
            raise DimensionError(f"itemset t={s.t}, database t={db.universe.t}")
    counts = _kernels.support_counts(db.masks, [s.mask for s in itemsets], db.universe.t)
    return [int(c) for c in counts]


def frequency(itemset: ItemSet, db: TransactionDatabase) -> Fraction:
    if len(db) == 0:
        raise UndefinedFrequencyError("frequency over an empty database")
    return Fraction(support(itemset, db), len(db))


@dataclass(frozen=True)
class PrivacyRule:
    """A confidential itemset whose support must not be pinned to [s_min, s_max]."""

    itemset: ItemSet
    s_min: int
    s_max: int

    def __post_init__(self):
        if not 0 <= self.s_min <= self.s_max:
            raise InputError(
                f"privacy rule needs 0 <= s_min <= s_max, got {self.s_min}, {self.s_max}"
            )


@dataclass(frozen=True)
class DeviationRow:
    itemset: ItemSet
    target: int
    actual: int

    @property
    def deviation(self) -> int:
        return self.actual - self.target


@dataclass(frozen=True)
class SynthesisReport:
    n_target: int
    n_actual: int
    per_constraint: tuple[DeviationRow, ...]
    lp_objective: float | None = None

    @property
    def sum_abs_deviation(self) -> int:
        return sum(abs(r.deviation) for r in self.per_constraint)

    @property
    def max_abs_deviation(self) -> int:
        return max((abs(r.deviation) for r in self.per_constraint), default=0)


def deviation_report(
    db: TransactionDatabase, cs: ConstraintSet, lp_objective: float | None = None
) -> SynthesisReport:
    if db.universe.t != cs.universe.t:
        raise DimensionError(f"database t={db.universe.t}, constraints t={cs.universe.t}")
    actual = supports(cs.itemsets, db)
    rows = tuple(
        DeviationRow(c.itemset, c.support, a) for c, a in zip(cs.constraints, actual)
    )
    return SynthesisReport(cs.n, len(db), rows, lp_objective)
