"""Leakage audits for confidential itemset supports, and scrubbing.

An audit asks, per rule (I, s_min, s_max), how well the public constraints
can be met by a database whose support(I) lies *outside* [s_min, s_max].
Each side of the interval is one branch:

    A: 0 <= s' <= s_min - 1        (absent when s_min = 0)
    B: s_max + 1 <= s' <= n        (absent when s_max = n)

For a branch the relaxation of S plus a boxed support variable for I is
solved first; its optimum is a lower bound. The relaxation is loose (it is
0 on most small instances), so the branch confidence is the smallest deviation that
rounding actually realizes on S u {(I, s*)} over a few targets s* in the
range (and on S alone): the sum of |support - s_i| over
S plus the distance of support(I) from the branch range. That value is an
upper bound on the best integer deviation and comes with a database, so a
small confidence is always backed by a witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from invfim.formulation import Layout, build_audit_lp
from invfim.model import (
    ConstraintSet,
    InputError,
    ItemSet,
    PrivacyRule,
    SupportConstraint,
    TransactionDatabase,
    is_subset,
    supports,
)
from invfim.simplex import SolverConfig, solve
from invfim.synth import synthesize

DEFAULT_THRESHOLD = 1.0
SCRUB_LINEAGE = "scrubbed"
# branch ranges shorter than this have every value tried as a target
MAX_TARGETS = 8


@dataclass(frozen=True)
class BranchResult:
    lo: int
    hi: int
    lp_bound: float
    target: int | None
    confidence: float
    database: TransactionDatabase | None
    support: int | None


@dataclass(frozen=True, eq=False)
class AuditFinding:
    rule: PrivacyRule
    confidence_low_branch: float | None
    confidence_high_branch: float | None
    confidence: float
    witness: TransactionDatabase | None
    leaked: bool
    lp_low_branch: float | None = None
    lp_high_branch: float | None = None
    branches: tuple[BranchResult, ...] = field(default=(), repr=False)


def _distance(value: int, lo: int, hi: int) -> int:
    return max(lo - value, 0, value - hi)


def _targets(lp_value: float, lo: int, hi: int) -> list[int]:
    first = int(np.clip(round(lp_value), lo, hi))
    rest = range(lo, hi + 1) if hi - lo < MAX_TARGETS else (lo, hi)
    return [first] + [s for s in rest if s != first]


def _branch(
    cs: ConstraintSet,
    itemset: ItemSet,
    lo: int,
    hi: int,
    method: str,
    seed: int,
    config: SolverConfig | None,
    refine_rounds: int,
) -> BranchResult:
    model = build_audit_lp(cs, itemset, lo, hi)
    sol = solve(model, config)
    if not sol.optimal:
        # not even a fractional database puts support(I) in this range
        return BranchResult(lo, hi, math.inf, None, math.inf, None, None)
    L = Layout(cs.m + 1, cs.t)
    best = None
    # None: synthesize S alone and see where support(I) lands
    for target in _targets(float(sol.values[L.z(cs.m)]), lo, hi) + [None]:
        if target is None:
            extended = cs
        else:
            extra = SupportConstraint(itemset, target)
            extended = ConstraintSet(cs.universe, cs.n, cs.constraints + (extra,), check=False)
        db = synthesize(
            extended, method=method, seed=seed, refine_rounds=refine_rounds, config=config
        ).database
        got = supports(cs.itemsets + [itemset], db)
        dev = sum(abs(a - s) for a, s in zip(got[:-1], cs.supports))
        conf = float(dev + _distance(got[-1], lo, hi))
        if best is None or conf < best.confidence:
            best = BranchResult(lo, hi, float(sol.objective), target, conf, db, got[-1])
        if conf == 0:
            break
    return best


def audit(
    cs: ConstraintSet,
    rules: Sequence[PrivacyRule],
    threshold: float = DEFAULT_THRESHOLD,
    method: str = "best",
    seed: int = 0,
    config: SolverConfig | None = None,
    refine_rounds: int = 2,
) -> list[AuditFinding]:
    """One finding per rule; ``leaked`` when no branch gets below ``threshold``."""
    findings = []
    for rule in rules:
        I = rule.itemset
        if I.t != cs.t:
            raise InputError(f"rule itemset {I} not over the {cs.t}-item universe")
        if rule.s_max > cs.n:
            raise InputError(f"rule {I}: s_max {rule.s_max} exceeds n={cs.n}")
        low = high = None
        if rule.s_min > 0:
            low = _branch(cs, I, 0, rule.s_min - 1, method, seed, config, refine_rounds)
        if rule.s_max < cs.n:
            high = _branch(cs, I, rule.s_max + 1, cs.n, method, seed, config, refine_rounds)
        present = [b for b in (low, high) if b is not None]
        conf = min((b.confidence for b in present), default=math.inf)
        leaked = all(b.confidence >= threshold for b in present)
        witness = None
        if conf <= threshold:
            best = min(present, key=lambda b: b.confidence)
            if _distance(best.support, best.lo, best.hi) == 0:
                witness = best.database
        findings.append(
            AuditFinding(
                rule,
                None if low is None else low.confidence,
                None if high is None else high.confidence,
                conf,
                witness,
                leaked,
                None if low is None else low.lp_bound,
                None if high is None else high.lp_bound,
                tuple(present),
            )
        )
    return findings


# -- scrubbing ---------------------------------------------------------------


def scrub_database(
    db: TransactionDatabase, rules: Sequence[PrivacyRule], seed: int = 0
) -> tuple[TransactionDatabase, list[int]]:
    """Randomize the support of every rule's itemset in turn.

    Returns the new database and the drawn target per rule. Rules are applied
    in order; a rule's target survives later rules when its itemset is
    disjoint from theirs.
    """
    rng = np.random.default_rng(seed)
    t = db.universe.t
    rows = list(db.masks)
    n = len(rows)
    targets = []
    for rule in rules:
        if rule.itemset.t != t:
            raise InputError(f"rule itemset {rule.itemset} not over the {t}-item universe")
        I = rule.itemset.mask
        r = int(rng.integers(0, n + 1))
        targets.append(r)
        inside = [p for p, row in enumerate(rows) if row & I == I]
        gap = r - len(inside)
        if gap > 0:
            outside = [p for p, row in enumerate(rows) if row & I != I]
            for p in rng.choice(outside, size=gap, replace=False):
                rows[p] |= I
        elif gap < 0:
            items = rule.itemset.items
            for p in rng.choice(inside, size=-gap, replace=False):
                while True:
                    picks = rng.integers(0, 2, size=len(items))
                    if picks.any():
                        break
                drop = sum(1 << k for k, b in zip(items, picks) if b)
                rows[p] &= ~drop
    out = db.with_rows(ItemSet.from_mask(r, t) for r in rows)
    return out, targets


def is_monotone(cs: ConstraintSet) -> bool:
    """I_a subset of I_b implies s_a >= s_b for every comparable pair."""
    for a in cs.constraints:
        for b in cs.constraints:
            if a is not b and is_subset(a.itemset, b.itemset) and a.support < b.support:
                return False
    return True


def scrub_constraints(cs: ConstraintSet, sensitive: ItemSet, seed: int = 0) -> ConstraintSet:
    """Randomize the constraint that overlaps ``sensitive`` most, then repair monotonicity.

    Refuses input that is itself the output of a scrub.
    """
    if cs.lineage and cs.lineage.startswith(SCRUB_LINEAGE):
        raise InputError(f"constraint set already scrubbed ({cs.lineage}); refusing a second pass")
    if sensitive.t != cs.t:
        raise InputError(f"sensitive itemset {sensitive} not over the {cs.t}-item universe")
    rng = np.random.default_rng(seed)
    overlap = [len(c.itemset & sensitive) for c in cs.constraints]
    pick = int(np.argmax(overlap))
    sup = cs.supports
    sup[pick] = int(rng.integers(0, cs.n + 1))
    # one pass in ascending size: every subset is final before its supersets
    order = sorted(range(cs.m), key=lambda i: (len(cs.constraints[i].itemset), i))
    for b in order:
        Ib = cs.constraints[b].itemset
        for a in range(cs.m):
            if a != b and is_subset(cs.constraints[a].itemset, Ib) and sup[a] < sup[b]:
                sup[b] = sup[a]
    cons = tuple(SupportConstraint(c.itemset, s) for c, s in zip(cs.constraints, sup))
    lineage = f"{SCRUB_LINEAGE} seed={seed} sensitive={' '.join(map(str, sensitive.items))}"
    return ConstraintSet(cs.universe, cs.n, cons, comments=cs.comments, lineage=lineage)


__all__ = [
    "AuditFinding",
    "BranchResult",
    "DEFAULT_THRESHOLD",
    "audit",
    "is_monotone",
    "scrub_constraints",
    "scrub_database",
]
