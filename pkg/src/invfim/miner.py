"""Level-wise frequent itemset mining with exact integer supports."""

from __future__ import annotations

from itertools import combinations

from invfim import _kernels
from invfim.model import (
    ConstraintSet,
    InputError,
    ItemSet,
    SupportConstraint,
    TransactionDatabase,
)


def mine_frequent(
    db: TransactionDatabase, minsup: int, maxlen: int
) -> list[tuple[ItemSet, int]]:
    """All itemsets with 1 <= size <= maxlen and support >= minsup.

    Output is sorted by size, then by ascending item ids. A threshold above
    every support gives an empty list.
    """
    t = db.universe.t
    if minsup < 0:
        raise InputError(f"minsup must be >= 0, got {minsup}")
    if not 1 <= maxlen <= t:
        raise InputError(f"maxlen must lie in [1, {t}], got {maxlen}")

    rows = db.masks
    found: list[tuple[tuple[int, ...], int]] = []
    level = [(k,) for k in range(t)]
    size = 1
    while level and size <= maxlen:
        masks = [sum(1 << k for k in cand) for cand in level]
        counts = _kernels.support_counts(rows, masks, t)
        frequent = [cand for cand, c in zip(level, counts) if c >= minsup]
        found.extend((cand, int(c)) for cand, c in zip(level, counts) if c >= minsup)
        size += 1
        level = _next_level(frequent)

    found.sort(key=lambda pair: (len(pair[0]), pair[0]))
    return [(ItemSet.from_items(items, t), c) for items, c in found]


def _next_level(frequent: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    # join on a shared (k-1)-prefix, then drop candidates with an infrequent subset
    known = set(frequent)
    out = []
    for a_idx, a in enumerate(frequent):
        for b in frequent[a_idx + 1:]:
            if a[:-1] != b[:-1]:
                break
            cand = a + (b[-1],)
            if all(sub in known for sub in combinations(cand, len(cand) - 1)):
                out.append(cand)
    return out


def extract_constraints(db: TransactionDatabase, minsup: int, maxlen: int) -> ConstraintSet:
    mined = mine_frequent(db, minsup, maxlen)
    if not mined:
        raise InputError(f"no itemset reaches minsup={minsup}; nothing to constrain")
    if len(db) < 1:
        raise InputError("cannot extract constraints from an empty database")
    return ConstraintSet(
        db.universe, len(db), tuple(SupportConstraint(s, c) for s, c in mined)
    )
