"""End-to-end synthesis: formulate, solve, round, materialize, report."""

from __future__ import annotations

from dataclasses import dataclass

from invfim.formulation import LpModel, build_relaxed_lp
from invfim.model import ConstraintSet, SynthesisReport, TransactionDatabase, deviation_report
from invfim.rounding import (
    METHODS,
    RoundedSolution,
    build_database,
    round_solution,
    spread_solution,
)
from invfim.simplex import LpSolution, SolverConfig, SolverError, solve

BEST = "best"


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    model: LpModel
    relaxation: LpSolution
    rounded: RoundedSolution
    database: TransactionDatabase
    report: SynthesisReport


def solve_relaxation(cs: ConstraintSet, config: SolverConfig | None = None):
    model = build_relaxed_lp(cs)
    sol = solve(model, config)
    if not sol.optimal:
        raise SolverError(f"relaxation not solved: {sol.status} after {sol.iterations} pivots")
    return model, sol


def _score(report: SynthesisReport):
    return (report.max_abs_deviation, report.sum_abs_deviation)


def round_and_build(
    cs: ConstraintSet,
    sol: LpSolution,
    method: str,
    seed: int = 0,
    refine_rounds: int = 2,
    objective: str = "absolute",
):
    """Round with ``method`` (or every method, keeping the best, for ``"best"``)."""
    methods = METHODS if method == BEST else (method,)
    best = None
    for name in methods:
        rounded = round_solution(name, sol, cs, seed, refine_rounds, objective)
        db = build_database(rounded, cs.universe)
        report = deviation_report(db, cs, sol.objective)
        if best is None or _score(report) < _score(best[2]):
            best = (rounded, db, report)
    return best


def synthesize(
    cs: ConstraintSet,
    method: str = "derandom-x",
    seed: int = 0,
    refine_rounds: int = 2,
    objective: str = "absolute",
    config: SolverConfig | None = None,
    spread: bool = True,
) -> SynthesisResult:
    model, sol = solve_relaxation(cs, config)
    start = spread_solution(sol, cs) if spread else sol
    rounded, db, report = round_and_build(cs, start, method, seed, refine_rounds, objective)
    return SynthesisResult(model, start, rounded, db, report)
