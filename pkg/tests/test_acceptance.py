"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is
printed in the terminal summary."""

import itertools
import time

import numpy as np

from invfim.formulation import Layout, build_relaxed_lp
from invfim.io import format_report, parse_report
from invfim.miner import extract_constraints
from invfim.model import (
    ConstraintSet,
    InputError,
    ItemSet,
    PrivacyRule,
    SupportConstraint,
    TransactionDatabase,
    deviation_report,
)
from invfim.oracle import (
    Graph,
    brute_force_optimum,
    coloring_to_database,
    optimal_witnesses,
    reduce_3coloring,
)
from invfim.privacy import audit, is_monotone, scrub_constraints, scrub_database
from invfim.rounding import (
    METHODS,
    build_database,
    derandomize_x,
    randomized_round_u,
    randomized_round_x,
    round_solution,
    spread_solution,
)
from invfim.synth import solve_relaxation, synthesize


def _holds(row, val):
    lhs = sum(c * val[k] for k, c in zip(row.cols, row.coefs))
    if row.rel == "<=":
        return lhs <= row.rhs
    if row.rel == ">=":
        return lhs >= row.rhs
    return lhs == row.rhs


def _scan_counts(db, cs):
    # independent support count: per-row subset test on item tuples
    rows = [set(r.items.items) for r in db.rows]
    return [sum(1 for r in rows if set(I.items) <= r) for I in cs.itemsets]


def test_c1_encoding_laws(criterion):
    t0 = time.perf_counter()
    violations = 0
    for size in range(1, 6):
        cs = ConstraintSet.from_pairs(size, 1, [(range(size), 0)])
        model = build_relaxed_lp(cs)
        L = Layout(1, size)
        y = L.y(0, 0)
        rows = [r for r in model.rows if r.group.startswith("subset") and y in r.cols]
        assert len(rows) == 2
        for bits in itertools.product((0, 1), repeat=size):
            for yv in (0, 1):
                val = {L.u(0, k): b for k, b in enumerate(bits)}
                val[y] = yv
                ok = all(_holds(r, val) for r in rows)
                violations += ok != (yv == int(all(bits)))
    for n in range(1, 13):
        cs = ConstraintSet.from_pairs(1, n, [([0], 0)])
        model = build_relaxed_lp(cs)
        L = Layout(1, 1)
        x, y, X = L.xx(0, 0), L.y(0, 0), L.X(0)
        rows = [r for r in model.rows if x in r.cols and r.group != "support"]
        assert len(rows) == 4
        for Xv in range(0, n + 1):
            for yv in (0, 1):
                for xv in range(-1, n + 2):
                    val = {x: xv, y: yv, X: Xv}
                    ok = all(_holds(r, val) for r in rows)
                    violations += ok != (xv == Xv * yv)
    took = time.perf_counter() - t0
    ok = violations == 0 and took < 1.0
    criterion(1, ok, f"violations={violations} runtime={took:.3f}s")
    assert ok


def test_c2_model_size(criterion):
    expected = {(1, 1): (9, 19), (3, 5): (51, 103), (10, 20): (461, 912), (27, 9): (1819, 4871)}
    got = {}
    for (m, t), want in expected.items():
        pairs = [(ItemSet.from_mask(a, t).items, 1) for a in range(1, m + 1)]
        model = build_relaxed_lp(ConstraintSet.from_pairs(t, 5, pairs))
        got[(m, t)] = (model.n_columns, model.n_rows)
    ok = got == expected
    criterion(2, ok, " ".join(f"(m={m},t={t})->{c}/{r}" for (m, t), (c, r) in got.items()))
    assert ok


def _random_tiny(rng, t=3, n=6):
    m = int(rng.integers(1, 4))
    masks = rng.choice(np.arange(1, 1 << t), size=m, replace=False)
    pairs = [(ItemSet.from_mask(int(a), t).items, int(rng.integers(0, n + 1))) for a in masks]
    return ConstraintSet.from_pairs(t, n, pairs)


def test_c3_oracle_sandwich(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    bound_fail = consistency_fail = 0
    instances = 120
    for _ in range(instances):
        cs = _random_tiny(rng)
        oracle = brute_force_optimum(cs, "overshoot")
        _, sol = solve_relaxation(cs)
        if not sol.objective <= oracle.optimum + 1e-6:
            bound_fail += 1
        for start in (sol, spread_solution(sol, cs)):
            for method in METHODS:
                db = build_database(round_solution(method, start, cs, seed=3), cs.universe)
                rep = deviation_report(db, cs, sol.objective)
                actual = [r.actual for r in rep.per_constraint]
                if (
                    len(db) != cs.n
                    or rep.n_actual != cs.n
                    or actual != _scan_counts(db, cs)
                    or any(r.deviation != r.actual - r.target for r in rep.per_constraint)
                    or rep.sum_abs_deviation != sum(abs(a - s) for a, s in zip(actual, cs.supports))
                ):
                    consistency_fail += 1
    took = time.perf_counter() - t0
    ok = bound_fail == 0 and consistency_fail == 0 and took < 120
    criterion(
        3,
        ok,
        f"instances={instances} bound_fail={bound_fail} report_fail={consistency_fail} runtime={took:.1f}s",
    )
    assert ok


def _disjoint_instance(rng):
    t = int(rng.integers(2, 13))
    m = int(rng.integers(1, min(4, t) + 1))
    n = int(rng.integers(1, 51))
    items = rng.permutation(t)
    cuts = sorted(rng.choice(np.arange(1, t), size=m - 1, replace=False)) if m > 1 else []
    groups = np.split(items, cuts)
    pairs = []
    for g in groups:
        keep = g[: int(rng.integers(1, len(g) + 1))]
        pairs.append((sorted(int(k) for k in keep), int(rng.integers(0, n + 1))))
    return ConstraintSet.from_pairs(t, n, pairs)


def test_c4_derandomization_guarantee(criterion):
    rng = np.random.default_rng(77)
    instances = 60
    realized_fail = steps = step_fail = 0
    for k in range(instances):
        cs = _disjoint_instance(rng)
        _, sol = solve_relaxation(cs)
        for start in (sol, spread_solution(sol, cs)):
            for kind in ("absolute", "signed"):
                r = derandomize_x(start, cs, seed=k, objective=kind)
                if r.objective(kind) > r.initial_expectation + 1e-6:
                    realized_fail += 1
                for st in r.trace:
                    steps += 1
                    step_fail += st.chosen_expectation > st.other_expectation
    ok = realized_fail == 0 and step_fail == 0 and steps > 0
    criterion(
        4,
        ok,
        f"instances={instances} realized_fail={realized_fail} steps={steps} step_fail={step_fail}",
    )
    assert ok


def test_c5_randomized_calibration(criterion):
    # spread vertex of a small instance: several columns with fractional x*/X
    cs = ConstraintSet.from_pairs(3, 12, [([0], 5), ([1], 7), ([0, 2], 3)])
    _, sol = solve_relaxation(cs)
    start = spread_solution(sol, cs)
    L = Layout(cs.m, cs.t)
    X = L.X_vector(start.values)
    assert np.allclose(X, np.round(X))  # counts are fixed, so x*/X is too
    q = L.XX_matrix(start.values) / np.where(X > 0, X, 1)[None, :]
    U = np.clip(L.U_matrix(start.values), 0, 1)
    seeds = 10_000
    sel_sum = np.zeros_like(q)
    u_sum = np.zeros_like(U)
    for s in range(seeds):
        sel_sum += randomized_round_x(start, cs, seed=s).selected
        ru = randomized_round_u(start, cs, seed=s)
        u_sum += np.array([[int(k in J.items) for k in range(cs.t)] for J in ru.itemsets])
    used = X > 0
    err_x = float(np.abs(sel_sum / seeds - q)[:, used].max())
    err_u = float(np.abs(u_sum / seeds - U).max())
    fractional = int(((q > 0.05) & (q < 0.95))[:, used].sum())
    ok = err_x <= 0.02 and err_u <= 0.02 and fractional > 0
    criterion(5, ok, f"seeds={seeds} max|freq-x*/X|={err_x:.4f} max|freq-u*|={err_u:.4f}")
    assert ok


def test_c6_three_coloring(criterion):
    g = Graph(3, ((0, 1), (1, 2), (0, 2)))
    cs = reduce_3coloring(g, k0=1)
    shape_ok = (cs.m, cs.n, cs.t) == (27, 729, 9)
    db = coloring_to_database(g, "RGB", cs.n)
    counts = _scan_counts(db, cs)
    zero_ok = all(a == 0 for a, s in zip(counts, cs.supports) if s == 0)
    n_zero = sum(1 for s in cs.supports if s == 0)
    single_ok = all(
        abs(a - s) <= 2 for a, s, I in zip(counts, cs.supports, cs.itemsets) if len(I) == 1
    )
    t0 = time.perf_counter()
    res = synthesize(cs)
    took = time.perf_counter() - t0
    synth_ok = len(res.database) == 729 and took < 60
    ok = shape_ok and n_zero == 18 and zero_ok and single_ok and len(db) == 729 and synth_ok
    criterion(
        6,
        ok,
        f"m={cs.m} n={cs.n} t={cs.t} zero-constraints={n_zero} exact={zero_ok} "
        f"singletons-within-2={single_ok} synth_rows={len(res.database)} synth={took:.1f}s "
        f"max_abs_dev={res.report.max_abs_deviation}",
    )
    assert ok


def test_c7_round_trip_desk_scale(criterion):
    details = []
    ok = True
    for seed in range(5):
        rng = np.random.default_rng(seed)
        ground = TransactionDatabase.from_lists(
            [[k for k in range(8) if rng.random() < 0.5] for _ in range(40)], 8
        )
        cs = extract_constraints(ground, 12, 3)
        res = synthesize(cs, method="best", seed=seed)
        text = format_report(res.report)
        back = parse_report(text, cs.t).report
        lp_ok = abs(res.relaxation.objective) <= 1e-6
        dev = res.report.max_abs_deviation
        parse_ok = back == res.report and len(res.database) == 40
        ok &= lp_ok and dev <= cs.m and parse_ok
        details.append(f"seed{seed}:m={cs.m},max_dev={dev},lp={res.relaxation.objective:.1e}")
    criterion(7, ok, " ".join(details))
    assert ok


def test_c8_privacy(criterion):
    cs = ConstraintSet.from_pairs(3, 6, [([0], 6), ([1], 6)])
    rule = PrivacyRule(ItemSet.from_items([0, 1], 3), 6, 6)
    f = audit(cs, [rule])[0]
    leak_ok = f.confidence_high_branch is None and f.confidence_low_branch >= 1 and f.leaked
    pair = [int(a & 0b011 == 0b011) for a in range(8)]
    forced = all(int(np.dot(v, pair)) == 6 for v in optimal_witnesses(cs, "absolute"))
    cs2 = ConstraintSet.from_pairs(3, 6, [([0], 3)])
    rule2 = PrivacyRule(ItemSet.from_items([1], 3), 3, 3)
    g = audit(cs2, [rule2])[0]
    w = g.witness
    witness_ok = (
        w is not None
        and _scan_counts(w, cs2) == [3]
        and _scan_counts(w, ConstraintSet.from_pairs(3, 6, [([1], 0)]))[0] != 3
    )
    safe_ok = g.confidence == 0 and not g.leaked and witness_ok
    ok = leak_ok and forced and safe_ok
    criterion(
        8,
        ok,
        f"forced: c_low={f.confidence_low_branch} c_high={f.confidence_high_branch} "
        f"leaked={f.leaked} oracle_forced={forced}; free: c={g.confidence} leaked={g.leaked} "
        f"witness={witness_ok}",
    )
    assert ok


def test_c9_scrub_postconditions(criterion):
    rng = np.random.default_rng(9)
    db = TransactionDatabase.from_lists(
        [[k for k in range(9) if rng.random() < 0.4] for _ in range(30)], 9
    )
    rules = [
        PrivacyRule(ItemSet.from_items([0, 1], 9), 0, 30),
        PrivacyRule(ItemSet.from_items([2], 9), 0, 30),
        PrivacyRule(ItemSet.from_items([4, 5, 7], 9), 0, 30),
    ]
    probe = ConstraintSet(db.universe, 30, tuple(SupportConstraint(r.itemset, 0) for r in rules))
    db_ok = True
    for seed in range(20):
        out, targets = scrub_database(db, rules, seed)
        final = _scan_counts(out, probe)
        db_ok &= final == targets and len(out) == len(db)
    mono_ok = refuse_ok = True
    for seed in range(20):
        cs = extract_constraints(db, 4, 3)
        sens = ItemSet.from_items(sorted(rng.choice(9, size=2, replace=False).tolist()), 9)
        once = scrub_constraints(cs, sens, seed)
        mono_ok &= is_monotone(once)
        try:
            scrub_constraints(once, sens, seed + 1)
            refuse_ok = False
        except InputError:
            pass
    ok = db_ok and mono_ok and refuse_ok
    criterion(9, ok, f"db_targets_exact={db_ok} monotone={mono_ok} second_pass_refused={refuse_ok}")
    assert ok
