"""Plain-text readers and writers.

Formats
-------
``.dat``  one transaction per line, ascending 0-based item ids separated by
          single spaces; an empty line is an empty transaction. Leading ``#``
          lines are a header; ``# t <int>`` in it fixes the universe size.
``.cst``  ``n <int>``, ``t <int>``, then ``<ids> : <support>`` per line.
``.prv``  ``<ids> : <s_min> <s_max>`` per line.
edges     ``u v`` per line, 0-based vertex ids.

``#`` lines are comments everywhere. Writing what was read reproduces the
input byte for byte as long as it was produced by these writers.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from invfim.model import (
    ConstraintSet,
    DeviationRow,
    InputError,
    ItemSet,
    ItemUniverse,
    PrivacyRule,
    SupportConstraint,
    SynthesisReport,
    TransactionDatabase,
)

LINEAGE_PREFIX = "# lineage:"


def _read_text(source) -> str:
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8", newline="") as fh:
            return fh.read()
    raise InputError(f"no such file: {source}")


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _parse_ids(text: str, where: str) -> list[int]:
    try:
        ids = [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise InputError(f"{where}: bad item id ({exc})") from None
    if any(k < 0 for k in ids):
        raise InputError(f"{where}: negative item id")
    if ids != sorted(set(ids)):
        raise InputError(f"{where}: item ids must be strictly ascending")
    return ids


def _ids(itemset: ItemSet) -> str:
    return " ".join(str(k) for k in itemset.items)


def _header_lines(comments: Iterable[str]) -> list[str]:
    out = []
    for c in comments:
        out.append(c if c.startswith("#") else "# " + c)
    return out


# -- databases ---------------------------------------------------------------


def parse_database(text: str, t: int | None = None) -> TransactionDatabase:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    header: list[str] = []
    body: list[list[int]] = []
    declared_t = None
    in_header = True
    for lineno, line in enumerate(lines, start=1):
        line = line.rstrip("\r")
        if line.startswith("#"):
            if in_header:
                header.append(line)
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "t":
                    declared_t = int(parts[1])
            continue
        in_header = False
        body.append(_parse_ids(line, f"line {lineno}"))
    if t is None:
        t = declared_t
    if t is None:
        t = max((ids[-1] for ids in body if ids), default=0) + 1
    for ids in body:
        if ids and ids[-1] >= t:
            raise InputError(f"item id {ids[-1]} outside universe of {t} items")
    return TransactionDatabase.from_itemsets(
        ItemUniverse(t), (ItemSet.from_items(ids, t) for ids in body), header
    )


def format_database(db: TransactionDatabase, header: Sequence[str] | None = None) -> str:
    lines = _header_lines(db.comments if header is None else header)
    if not any(line.split()[:2] == ["#", "t"] for line in lines):
        lines.append(f"# t {db.universe.t}")
    lines.extend(_ids(row.items) for row in db.rows)
    return "\n".join(lines) + "\n"


def read_database(path, t: int | None = None) -> TransactionDatabase:
    return parse_database(_read_text(path), t)


def write_database(db: TransactionDatabase, path, header: Sequence[str] | None = None) -> None:
    _write_text(path, format_database(db, header))


# -- constraint sets ---------------------------------------------------------


def parse_constraints(text: str) -> ConstraintSet:
    n = t = None
    header: list[str] = []
    lineage = None
    pairs: list[tuple[list[int], int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            if not pairs:
                header.append(raw.rstrip())
            if line.startswith(LINEAGE_PREFIX):
                lineage = line[len(LINEAGE_PREFIX):].strip()
            continue
        if not line:
            continue
        if ":" not in line:
            key, _, val = line.partition(" ")
            try:
                value = int(val)
            except ValueError:
                raise InputError(f"line {lineno}: expected '<key> <int>', got {raw!r}") from None
            if key == "n":
                n = value
            elif key == "t":
                t = value
            else:
                raise InputError(f"line {lineno}: unknown header key {key!r}")
            continue
        left, _, right = line.partition(":")
        ids = _parse_ids(left, f"line {lineno}")
        try:
            s = int(right.strip())
        except ValueError:
            raise InputError(f"line {lineno}: bad support {right.strip()!r}") from None
        if not ids:
            raise InputError(f"line {lineno}: empty constraint itemset")
        pairs.append((ids, s))
    if n is None or t is None:
        raise InputError("constraint file needs 'n <int>' and 't <int>' lines")
    return ConstraintSet.from_pairs(t, n, pairs, comments=tuple(header), lineage=lineage)


def format_constraints(cs: ConstraintSet, header: Sequence[str] | None = None) -> str:
    lines = _header_lines(cs.comments if header is None else header)
    if cs.lineage and not any(line.startswith(LINEAGE_PREFIX) for line in lines):
        lines.append(f"{LINEAGE_PREFIX} {cs.lineage}")
    lines.append(f"n {cs.n}")
    lines.append(f"t {cs.t}")
    lines.extend(f"{_ids(c.itemset)} : {c.support}" for c in cs.constraints)
    return "\n".join(lines) + "\n"


def read_constraints(path) -> ConstraintSet:
    return parse_constraints(_read_text(path))


def write_constraints(cs: ConstraintSet, path, header: Sequence[str] | None = None) -> None:
    _write_text(path, format_constraints(cs, header))


# -- privacy rules -----------------------------------------------------------


def parse_privacy(text: str, t: int) -> list[PrivacyRule]:
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        left, sep, right = line.partition(":")
        bounds = right.split()
        if not sep or len(bounds) != 2:
            raise InputError(f"line {lineno}: expected '<ids> : <s_min> <s_max>'")
        ids = _parse_ids(left, f"line {lineno}")
        if any(k >= t for k in ids):
            raise InputError(f"line {lineno}: item id outside universe of {t} items")
        try:
            lo, hi = int(bounds[0]), int(bounds[1])
        except ValueError:
            raise InputError(f"line {lineno}: bad bounds {right.strip()!r}") from None
        rules.append(PrivacyRule(ItemSet.from_items(ids, t), lo, hi))
    return rules


def format_privacy(rules: Iterable[PrivacyRule]) -> str:
    return "".join(f"{_ids(r.itemset)} : {r.s_min} {r.s_max}\n" for r in rules)


def read_privacy(path, t: int) -> list[PrivacyRule]:
    return parse_privacy(_read_text(path), t)


# -- graphs ------------------------------------------------------------------


def parse_edges(text: str) -> list[tuple[int, int]]:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InputError(f"line {lineno}: expected 'u v'")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise InputError(f"line {lineno}: bad vertex id") from None
    return edges


def read_edges(path) -> list[tuple[int, int]]:
    return parse_edges(_read_text(path))


# -- deviation reports -------------------------------------------------------

REPORT_COLUMNS = ("itemset", "target", "actual", "deviation")
SUMMARY_KEYS = ("n_target", "n_actual", "lp_objective", "sum_abs_deviation", "max_abs_deviation")


def format_float(x: float | None) -> str:
    if x is None:
        return ""
    if abs(x) < 1e-9:
        x = 0.0
    return f"{x:.9g}"


def format_report(report: SynthesisReport, header: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in _header_lines(header):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for row in report.per_constraint:
        w.writerow((_ids(row.itemset), row.target, row.actual, row.deviation))
    w.writerow(("n_target", report.n_target))
    w.writerow(("n_actual", report.n_actual))
    w.writerow(("lp_objective", format_float(report.lp_objective)))
    w.writerow(("sum_abs_deviation", report.sum_abs_deviation))
    w.writerow(("max_abs_deviation", report.max_abs_deviation))
    return buf.getvalue()


@dataclass(frozen=True)
class ParsedReport:
    report: SynthesisReport
    summary: dict


def parse_report(text: str, t: int) -> ParsedReport:
    """Read a report back; summary values are returned as written."""
    rows = []
    summary = {}
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    head = next(reader, None)
    if head is None or tuple(head) != REPORT_COLUMNS:
        raise InputError(f"report header must be {','.join(REPORT_COLUMNS)}")
    for rec in reader:
        if not rec:
            continue
        if rec[0] in SUMMARY_KEYS:
            if len(rec) != 2:
                raise InputError(f"summary row {rec[0]} needs one value")
            summary[rec[0]] = rec[1]
            continue
        if len(rec) != 4:
            raise InputError(f"bad report row {rec}")
        itemset = ItemSet.from_items(_parse_ids(rec[0], "report"), t)
        target, actual, dev = int(rec[1]), int(rec[2]), int(rec[3])
        if actual - target != dev:
            raise InputError(f"row {rec[0]}: deviation {dev} != {actual} - {target}")
        rows.append(DeviationRow(itemset, target, actual))
    missing = [k for k in SUMMARY_KEYS if k not in summary]
    if missing:
        raise InputError(f"report lacks summary rows {missing}")
    lp = summary["lp_objective"]
    report = SynthesisReport(
        int(summary["n_target"]),
        int(summary["n_actual"]),
        tuple(rows),
        float(lp) if lp != "" else None,
    )
    if report.sum_abs_deviation != int(summary["sum_abs_deviation"]):
        raise InputError("sum_abs_deviation does not match the rows")
    if report.max_abs_deviation != int(summary["max_abs_deviation"]):
        raise InputError("max_abs_deviation does not match the rows")
    if lp != "" and not math.isfinite(float(lp)):
        raise InputError("lp_objective must be finite")
    return ParsedReport(report, summary)
