"""``invfim`` command line: mine, synth, verify, oracle, gen-3col, audit, scrub-db, scrub-cst.

Exit codes: 0 success, 1 bad input or usage, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import shlex
import sys
from typing import Sequence

from invfim import __version__
from invfim import io as fio
from invfim.formulation import build_relaxed_lp
from invfim.miner import extract_constraints
from invfim.model import DimensionError, InputError, ItemSet, deviation_report
from invfim.oracle import MODELS, Graph, ScaleError, brute_force_optimum, reduce_3coloring
from invfim.privacy import DEFAULT_THRESHOLD, audit, scrub_constraints, scrub_database
from invfim.rounding import METHODS, OBJECTIVES
from invfim.simplex import SolverError
from invfim.synth import BEST, synthesize

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _header(argv: Sequence[str], seed: int | None, extra: Sequence[str] = ()) -> list[str]:
    lines = [f"# invfim {__version__}", f"# command: {shlex.join(['invfim', *argv])}"]
    if seed is not None:
        lines.append(f"# seed: {seed}")
    return lines + [f"# {e}" for e in extra]


def _need_file(path: str) -> None:
    if not os.path.isfile(path):
        raise InputError(f"no such file: {path}")


def _need_dir_for(path: str | None) -> None:
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise InputError(f"output directory does not exist: {parent}")


def _ids(itemset: ItemSet) -> str:
    return " ".join(map(str, itemset.items))


# -- subcommands -------------------------------------------------------------


def cmd_mine(args, argv, out) -> int:
    _need_file(args.db)
    _need_dir_for(args.out)
    db = fio.read_database(args.db)
    cs = extract_constraints(db, args.minsup, args.maxlen)
    fio.write_constraints(cs, args.out, _header(argv, None))
    print(f"m={cs.m} n={cs.n} t={cs.t}", file=out)
    return EXIT_OK


def cmd_synth(args, argv, out) -> int:
    _need_file(args.constraints)
    for p in (args.out, args.report, args.dump_lp):
        _need_dir_for(p)
    cs = fio.read_constraints(args.constraints)
    if args.dump_lp:
        with open(args.dump_lp, "w", encoding="utf-8", newline="") as fh:
            fh.write(build_relaxed_lp(cs).to_text())
    res = synthesize(
        cs,
        method=args.method,
        seed=args.seed,
        refine_rounds=args.refine_rounds,
        objective=args.objective,
        spread=not args.no_spread,
    )
    head = _header(argv, args.seed, [f"method: {res.rounded.method}"])
    fio.write_database(res.database, args.out, head)
    rep = res.report
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="") as fh:
            fh.write(fio.format_report(rep, head))
    print(
        f"n={rep.n_actual} sum_abs_dev={rep.sum_abs_deviation} "
        f"max_abs_dev={rep.max_abs_deviation} lp_obj={fio.format_float(rep.lp_objective)}",
        file=out,
    )
    return EXIT_OK


def cmd_verify(args, argv, out) -> int:
    _need_file(args.db)
    _need_file(args.constraints)
    cs = fio.read_constraints(args.constraints)
    db = fio.read_database(args.db, cs.t)
    out.write(fio.format_report(deviation_report(db, cs, None), _header(argv, None)))
    return EXIT_OK


def cmd_oracle(args, argv, out) -> int:
    _need_file(args.constraints)
    _need_dir_for(args.out)
    cs = fio.read_constraints(args.constraints)
    res = brute_force_optimum(cs, args.model)
    print(f"model={res.model} optimum={fio.format_float(res.optimum)}", file=out)
    print("witness=" + " ".join(map(str, res.witness)), file=out)
    if args.out:
        fio.write_database(res.database(cs.t), args.out, _header(argv, None))
    return EXIT_OK


def cmd_gen3col(args, argv, out) -> int:
    _need_file(args.edges)
    _need_dir_for(args.out)
    edges = fio.read_edges(args.edges)
    g = Graph.from_edges(edges, args.vertices)
    cs = reduce_3coloring(g, args.k0)
    fio.write_constraints(cs, args.out, _header(argv, None))
    print(f"m={cs.m} n={cs.n} t={cs.t}", file=out)
    return EXIT_OK


def _real(x: float | None) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf"
    return fio.format_float(x)


def cmd_audit(args, argv, out) -> int:
    _need_file(args.constraints)
    _need_file(args.privacy)
    cs = fio.read_constraints(args.constraints)
    rules = fio.read_privacy(args.privacy, cs.t)
    findings = audit(cs, rules, args.threshold, args.method, args.seed, refine_rounds=args.refine_rounds)
    buf = io.StringIO()
    for line in _header(argv, args.seed):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("itemset", "s_min", "s_max", "c_low", "c_high", "confidence", "leaked"))
    for f in findings:
        w.writerow(
            (
                _ids(f.rule.itemset),
                f.rule.s_min,
                f.rule.s_max,
                _real(f.confidence_low_branch),
                _real(f.confidence_high_branch),
                _real(f.confidence),
                "true" if f.leaked else "false",
            )
        )
    out.write(buf.getvalue())
    return EXIT_OK


def cmd_scrub_db(args, argv, out) -> int:
    _need_file(args.db)
    _need_file(args.privacy)
    _need_dir_for(args.out)
    db = fio.read_database(args.db)
    rules = fio.read_privacy(args.privacy, db.universe.t)
    scrubbed, targets = scrub_database(db, rules, args.seed)
    drawn = " ".join(map(str, targets))
    fio.write_database(scrubbed, args.out, _header(argv, args.seed, [f"targets: {drawn}"]))
    print(f"targets={drawn}", file=out)
    return EXIT_OK


def cmd_scrub_cst(args, argv, out) -> int:
    _need_file(args.constraints)
    _need_dir_for(args.out)
    cs = fio.read_constraints(args.constraints)
    ids = fio._parse_ids(args.sensitive, "--sensitive")
    if not ids or ids[-1] >= cs.t:
        raise InputError(f"--sensitive needs item ids in [0, {cs.t})")
    res = scrub_constraints(cs, ItemSet.from_items(ids, cs.t), args.seed)
    fio.write_constraints(res, args.out, _header(argv, args.seed))
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="invfim", description="Synthesize transaction databases from itemset supports.")
    p.add_argument("--version", action="version", version=f"invfim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("mine", help="mine frequent itemsets into a constraint file")
    s.add_argument("--db", required=True)
    s.add_argument("--minsup", type=int, required=True)
    s.add_argument("--maxlen", type=int, default=3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_mine)

    s = sub.add_parser("synth", help="synthesize a database for a constraint file")
    s.add_argument("--constraints", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--method", choices=METHODS + (BEST,), default="derandom-x")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--refine-rounds", type=int, default=2)
    s.add_argument("--objective", choices=OBJECTIVES, default="absolute")
    s.add_argument("--no-spread", action="store_true", help="round the solver's vertex as is")
    s.add_argument("--report")
    s.add_argument("--dump-lp")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("verify", help="print the deviation report of a database")
    s.add_argument("--db", required=True)
    s.add_argument("--constraints", required=True)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("oracle", help="exact optimum by enumeration (tiny instances)")
    s.add_argument("--constraints", required=True)
    s.add_argument("--model", choices=MODELS, default="overshoot")
    s.add_argument("--out", help="write the witness database here")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("gen-3col", help="constraint set from a graph 3-coloring instance")
    s.add_argument("--edges", required=True)
    s.add_argument("--k0", type=int, default=1)
    s.add_argument("--vertices", type=int, help="vertex count (default: largest id + 1)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen3col)

    s = sub.add_parser("audit", help="leakage confidence per privacy rule")
    s.add_argument("--constraints", required=True)
    s.add_argument("--privacy", required=True)
    s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--method", choices=METHODS + (BEST,), default=BEST)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--refine-rounds", type=int, default=2)
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("scrub-db", help="randomize supports of sensitive itemsets in a database")
    s.add_argument("--db", required=True)
    s.add_argument("--privacy", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scrub_db)

    s = sub.add_parser("scrub-cst", help="randomize one constraint near a sensitive itemset")
    s.add_argument("--constraints", required=True)
    s.add_argument("--sensitive", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scrub_cst)
    return p


def run(argv: Sequence[str] | None = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args, argv, out)
    except SolverError as exc:
        print(f"invfim: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, DimensionError, ScaleError, ValueError, OSError) as exc:
        print(f"invfim: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
