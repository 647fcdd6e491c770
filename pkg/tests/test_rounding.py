import itertools

import numpy as np
import pytest

from invfim.formulation import Layout, assignment_from_database, build_relaxed_lp
from invfim.model import ConstraintSet, InputError, ItemSet, ItemUniverse, supports
from invfim.rounding import (
    METHODS,
    ProbabilityContext,
    RoundedSolution,
    UProbabilityContext,
    balance_counts,
    build_database,
    derandomize_u,
    derandomize_x,
    enumerate_branches,
    expected_objective,
    prob_subset,
    randomized_round_u,
    randomized_round_x,
    round_method1,
    round_method2,
    round_solution,
    split_parts,
    spread_solution,
)
from invfim.simplex import OPTIMAL, LpSolution
from invfim.synth import solve_relaxation


def relaxed(cs, spread=True):
    _, sol = solve_relaxation(cs)
    return spread_solution(sol, cs) if spread else sol


def integral_solution(cs, J, counts):
    vals = np.array(assignment_from_database(cs, J, counts), dtype=float)
    return LpSolution(OPTIMAL, vals, float(Layout(cs.m, cs.t).Z_vector(vals).sum()))


# -- balance_counts ----------------------------------------------------------


def test_balance_examples():
    assert list(balance_counts([2.0, 3.0], 5)) == [2, 3]
    outs = {tuple(balance_counts([0.5, 0.5], 1, seed)) for seed in range(20)}
    assert outs == {(1, 0), (0, 1)}
    assert tuple(balance_counts([0.5, 0.5], 1, 4)) == tuple(balance_counts([0.5, 0.5], 1, 4))
    with pytest.raises(InputError):
        balance_counts([-1.0, 2.0], 1)


def test_balance_uses_fewest_adjustments():
    rng = np.random.default_rng(8)
    for _ in range(100):
        k = int(rng.integers(2, 5))
        n = int(rng.integers(0, 9))
        x = rng.dirichlet(np.ones(k)) * n
        out = balance_counts(x, n, int(rng.integers(1000)))
        near = np.floor(x + 0.5)
        best = min(
            sum(abs(v - r) for v, r in zip(vec, near))
            for vec in itertools.product(range(n + 1), repeat=k)
            if sum(vec) == n
        )
        assert out.sum() == n and out.min() >= 0
        assert np.abs(out - near).sum() == best
        assert np.all(np.abs(out - x) < 1 + 1e-9)


# -- spreading ---------------------------------------------------------------


def test_split_parts():
    assert split_parts(6, 3) == [1, 2, 3]
    assert split_parts(5, 1) == [5]
    for total in range(1, 60):
        for k in range(1, min(total, 12) + 1):
            parts = split_parts(total, k)
            assert len(parts) == k and sum(parts) == total and min(parts) >= 1
            run = 0
            for p in parts[:-1]:
                assert p <= run + 1
                run += p
    with pytest.raises(InputError):
        split_parts(2, 3)


def test_spread_keeps_optimality_and_feasibility():
    rng = np.random.default_rng(9)
    for _ in range(15):
        t = 5
        masks = rng.choice(np.arange(1, 32), size=int(rng.integers(1, 5)), replace=False)
        n = int(rng.integers(5, 30))
        cs = ConstraintSet.from_pairs(
            t, n, [(ItemSet.from_mask(int(a), t).items, int(rng.integers(0, n + 1))) for a in masks]
        )
        model, sol = solve_relaxation(cs)
        sp = spread_solution(sol, cs)
        assert model.residuals(sp.values).max() < 1e-7
        assert float(np.dot(model.objective, sp.values)) == pytest.approx(sol.objective, abs=1e-7)
        X = Layout(cs.m, cs.t).X_vector(sp.values)
        assert X.sum() == pytest.approx(n)
        if n >= cs.m + 1:
            assert np.all(X > 0)


# -- naive rounding ----------------------------------------------------------

NESTED = ConstraintSet.from_pairs(3, 6, [([0], 4), ([0, 1], 2), ([2], 3)])
J_NESTED = [ItemSet.from_items(x, 3) for x in ([0, 1, 2], [0, 2], [0], [])]


def test_integral_input_is_reproduced_by_every_method():
    ostar = integral_solution(NESTED, J_NESTED, [2, 1, 1, 2])
    for method in METHODS:
        r = round_solution(method, ostar, NESTED, seed=5)
        assert r.counts == (2, 1, 1, 2), method
        assert list(r.zbar) == [0, 0, 0], method
    assert round_method1(ostar, NESTED).itemsets == tuple(J_NESTED)
    assert derandomize_u(ostar, NESTED).itemsets == round_method1(ostar, NESTED).itemsets


def test_method1_tie_goes_up():
    cs = ConstraintSet.from_pairs(2, 2, [([0], 1)])
    L = Layout(1, 2)
    v = np.zeros(L.n_columns)
    v[L.u(0, 0)] = 0.5
    v[L.X(0)] = 2
    v[L.xx(0, 0)] = 1
    v[L.y(0, 0)] = 0.5
    r = round_method1(LpSolution(OPTIMAL, v, 0.0), cs)
    assert r.itemsets[0] == ItemSet.from_items([0], 2)


def test_method2_union_and_empty_column():
    ostar = integral_solution(NESTED, J_NESTED, [2, 1, 1, 2])
    r = round_method2(ostar, NESTED)
    assert r.itemsets[0] == ItemSet.from_items([0, 1, 2], 3)
    assert r.itemsets[3] == ItemSet.empty(3)
    assert list(r.xbar.sum(axis=1)) == [4, 2, 3]


def check_invariants(r: RoundedSolution, cs):
    assert sum(r.counts) == cs.n and min(r.counts) >= 0
    assert len(r.itemsets) == cs.m + 1
    masks = [J.mask for J in r.itemsets]
    for i, I in enumerate(cs.itemsets):
        for j, Jm in enumerate(masks):
            assert r.ybar[i, j] == int(I.mask & Jm == I.mask)
            assert r.xbar[i, j] == r.ybar[i, j] * r.counts[j]
    assert list(r.zbar) == [x - s for x, s in zip(r.xbar.sum(axis=1), cs.supports)]


def test_random_tiny_invariants_and_union_only_grows():
    rng = np.random.default_rng(10)
    for _ in range(20):
        masks = rng.choice(np.arange(1, 8), size=int(rng.integers(1, 4)), replace=False)
        cs = ConstraintSet.from_pairs(
            3, 6, [(ItemSet.from_mask(int(a), 3).items, int(rng.integers(0, 7))) for a in masks]
        )
        ostar = relaxed(cs)
        for method in METHODS:
            check_invariants(round_solution(method, ostar, cs, seed=1), cs)
        r = randomized_round_x(ostar, cs, seed=2)
        # every selected itemset is covered by the union
        assert np.all(r.ybar[r.selected] == 1)


def test_build_database():
    r = RoundedSolution(
        (ItemSet.from_items([0], 2), ItemSet.from_items([0, 1], 2)),
        (2, 1),
        np.zeros((0, 2)),
        np.zeros((0, 2)),
        np.zeros(0),
    )
    db = build_database(r, ItemUniverse(2))
    assert len(db) == 3
    assert supports([ItemSet.from_items([0], 2), ItemSet.from_items([0, 1], 2)], db) == [3, 1]


# -- probabilities -----------------------------------------------------------


def test_prob_subset_disjoint_and_forced():
    cs = ConstraintSet.from_pairs(4, 8, [([0], 3), ([1, 2], 5)])
    ostar = relaxed(cs)
    L = Layout(cs.m, cs.t)
    counts = balance_counts(L.X_vector(ostar.values), cs.n)
    XX = L.XX_matrix(ostar.values)
    ctx = ProbabilityContext(cs, counts, XX)
    for i in range(cs.m):
        for j in range(cs.m + 1):
            want = XX[i, j] / counts[j] if counts[j] else 0.0
            assert prob_subset(ctx, i, j) == pytest.approx(min(1.0, want))
    # committing I_2 = {e2,e3} to a column forces nothing for {e1}, but fixing I_1 does
    j = int(np.argmax(counts))
    ctx.fix((0, j), 1)
    ctx.refresh()
    assert prob_subset(ctx, 0, j) == 1.0


def _monte_carlo_check(cs, refine_rounds):
    ostar = relaxed(cs)
    L = Layout(cs.m, cs.t)
    counts = balance_counts(L.X_vector(ostar.values), cs.n)
    ctx = ProbabilityContext(cs, counts, L.XX_matrix(ostar.values), refine_rounds)
    trials = 100_000
    rng = np.random.default_rng(11)
    q = ctx.base
    draws = rng.random((trials,) + q.shape) < q[None]
    masks = [I.mask for I in cs.itemsets]
    union = np.zeros((trials, cs.m + 1), dtype=np.int64)
    for i, a in enumerate(masks):
        union |= np.where(draws[:, i, :], a, 0)
    worst = 0.0
    for i, a in enumerate(masks):
        freq = ((union & a) == a).mean(axis=0)
        for j in range(cs.m + 1):
            if counts[j]:
                worst = max(worst, abs(prob_subset(ctx, i, j) - freq[j]))
    return worst


@pytest.mark.parametrize("rounds", [0, 2])
def test_prob_subset_two_overlapping_vs_monte_carlo(rounds):
    cs = ConstraintSet.from_pairs(3, 12, [([0], 7), ([0, 1], 4)])
    assert _monte_carlo_check(cs, rounds) <= 0.02


def test_prob_subset_first_round_exact_with_independent_covers():
    # {e1,e2} is covered by {e1} and {e2,e3} drawn independently: round 0 is exact
    cs = ConstraintSet.from_pairs(3, 12, [([0], 7), ([0, 1], 4), ([1, 2], 3)])
    assert _monte_carlo_check(cs, 0) <= 0.02


def test_expected_objective_closed_forms():
    cs = ConstraintSet.from_pairs(3, 6, [([0], 2), ([1], 3)])
    ostar = integral_solution(cs, [ItemSet.from_items(x, 3) for x in ([0, 1], [1], [])], [2, 1, 3])
    L = Layout(cs.m, cs.t)
    ctx = ProbabilityContext(cs, [2, 1, 3], L.XX_matrix(ostar.values))
    assert expected_objective(ctx, cs, "signed") == pytest.approx(0)
    assert expected_objective(ctx, cs, "absolute") == pytest.approx(0)
    ctx.probs[:] = 0
    assert expected_objective(ctx, cs, "signed") == pytest.approx(-5)
    assert expected_objective(ctx, cs, "absolute") == pytest.approx(5)
    with pytest.raises(InputError):
        expected_objective(ctx, cs, "bogus")


def test_expected_objective_vs_monte_carlo():
    cs = ConstraintSet.from_pairs(5, 20, [([0], 7), ([1, 2], 11), ([4], 2)])
    ostar = relaxed(cs)
    L = Layout(cs.m, cs.t)
    counts = balance_counts(L.X_vector(ostar.values), cs.n)
    XX = L.XX_matrix(ostar.values)
    signed, absolute = [], []
    for seed in range(100_000):
        r = randomized_round_x(ostar, cs, seed)
        if tuple(r.counts) != tuple(counts):
            continue
        signed.append(r.realized_objective)
        absolute.append(r.abs_objective)
    ctx = ProbabilityContext(cs, counts, XX)
    for kind, vals in (("signed", signed), ("absolute", absolute)):
        vals = np.asarray(vals)
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - expected_objective(ctx, cs, kind)) <= 2 * se + 1e-9


# -- derandomization ---------------------------------------------------------


@pytest.mark.parametrize("kind", ["absolute", "signed"])
def test_derandomize_x_single_constraint_matches_enumeration(kind):
    for s in range(0, 9):
        cs = ConstraintSet.from_pairs(2, 8, [([0, 1], s)])
        ostar = relaxed(cs)
        L = Layout(cs.m, cs.t)
        counts = balance_counts(L.X_vector(ostar.values), cs.n)
        r = derandomize_x(ostar, cs, objective=kind)
        ctx = ProbabilityContext(cs, counts, L.XX_matrix(ostar.values))
        fixed = []
        for step in r.trace:
            e = enumerate_branches(ctx, cs, [step.variable], kind)
            assert step.expect_zero == pytest.approx(e[(0,)])
            assert step.expect_one == pytest.approx(e[(1,)])
            assert step.chosen == (1 if e[(1,)] < e[(0,)] else 0)
            ctx.fix(step.variable, step.chosen)
            ctx.refresh()
            fixed.append(step.variable)
        assert r.objective(kind) <= r.initial_expectation + 1e-9


def test_derandomize_u_one_free_variable():
    ostar = integral_solution(NESTED, J_NESTED, [2, 1, 1, 2])
    L = Layout(NESTED.m, NESTED.t)
    v = ostar.values.copy()
    v[L.u(1, 1)] = 0.4
    half = LpSolution(OPTIMAL, v, 0.0)
    r = derandomize_u(half, NESTED)
    step = [s for s in r.trace if s.variable == (1, 1)][0]
    outcomes = {}
    for val in (0, 1):
        J = list(J_NESTED)
        J[1] = ItemSet.from_mask(J[1].mask | (val << 1), 3)
        got = round_method1(integral_solution(NESTED, J, [2, 1, 1, 2]), NESTED)
        outcomes[val] = got.abs_objective
    assert step.expect_zero == pytest.approx(outcomes[0])
    assert step.expect_one == pytest.approx(outcomes[1])
    assert step.chosen == (1 if outcomes[1] < outcomes[0] else 0)


def test_derandomize_u_steps_never_pick_worse_branch():
    rng = np.random.default_rng(12)
    for _ in range(15):
        masks = rng.choice(np.arange(1, 16), size=int(rng.integers(1, 4)), replace=False)
        cs = ConstraintSet.from_pairs(
            4, 8, [(ItemSet.from_mask(int(a), 4).items, int(rng.integers(0, 9))) for a in masks]
        )
        for kind in ("absolute", "signed"):
            r = derandomize_u(relaxed(cs), cs, objective=kind)
            assert all(s.chosen_expectation <= s.other_expectation for s in r.trace)
            assert r.objective(kind) <= r.initial_expectation + 1e-6


def test_derandomize_column_order_is_supported():
    cs = ConstraintSet.from_pairs(3, 6, [([0], 3), ([1], 2)])
    r = derandomize_x(relaxed(cs), cs, order="column-major")
    assert [s.variable for s in r.trace][:2] == [(0, 0), (1, 0)]
    with pytest.raises(InputError):
        derandomize_x(relaxed(cs), cs, order="diagonal")


def test_unknown_method():
    with pytest.raises(InputError):
        round_solution("nope", relaxed(NESTED), NESTED)


def test_u_context_probabilities_are_products():
    cs = ConstraintSet.from_pairs(3, 6, [([0, 1], 2)])
    ostar = relaxed(cs)
    L = Layout(cs.m, cs.t)
    U = np.clip(L.U_matrix(ostar.values), 0, 1)
    counts = balance_counts(L.X_vector(ostar.values), cs.n)
    ctx = UProbabilityContext(cs, counts, U)
    for j in range(cs.m + 1):
        assert ctx.column(j)[0] == pytest.approx(U[j, 0] * U[j, 1])


def test_randomized_extremes():
    ostar = integral_solution(NESTED, J_NESTED, [2, 1, 1, 2])
    for seed in range(10):
        r = randomized_round_x(ostar, NESTED, seed)
        assert list(r.zbar) == [0, 0, 0]
        assert randomized_round_u(ostar, NESTED, seed).itemsets == tuple(J_NESTED)
