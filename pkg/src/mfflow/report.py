"""Run reports and their CSV/JSON emission.

A report holds a metadata block, named tables and a list of certificates.
Every numeric cell is tagged either "exact" (serialized as "p/q") or with the
binary precision it was computed at (serialized in scientific notation with
enough digits to re-parse to the same binary value).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field

import mpmath

from .numerics import ExactScalar, exact, format_exact, is_exact

VERDICTS = ("pass", "fail", "skipped", "info")


@dataclass(frozen=True)
class Cell:
    """A serialized cell: ``text`` plus a tag (exact, bits, text, bool, none)."""

    text: str
    precision: object

    def to_json(self) -> dict:
        return {"value": self.text, "precision": self.precision}

    def parse(self):
        """The Python value this cell encodes (mpq, mpf at its precision, str, bool, None)."""
        if self.precision == "exact":
            return exact(self.text)
        if self.precision == "none":
            return None
        if self.precision == "bool":
            return self.text == "true"
        if self.precision == "text":
            return self.text
        with mpmath.workprec(int(self.precision)):
            return mpmath.mpf(self.text)


def digits_for_bits(bits: int) -> int:
    """Decimal digits that round-trip a binary value of the given precision."""
    return math.ceil(bits * math.log10(2)) + 2


def format_real(x, bits: int) -> str:
    return mpmath.nstr(x, digits_for_bits(bits), min_fixed=1, max_fixed=0, strip_zeros=False)


def make_cell(x, bits: int | None = None) -> Cell:
    if isinstance(x, Cell):
        return x
    if x is None:
        return Cell("", "none")
    if isinstance(x, bool):
        return Cell("true" if x else "false", "bool")
    if is_exact(x):
        return Cell(format_exact(x), "exact")
    if isinstance(x, str):
        return Cell(x, "text")
    if isinstance(x, float):
        x = mpmath.mpf(x)
    if isinstance(x, mpmath.mpf):
        bits = mpmath.mp.prec if bits is None else bits
        if not mpmath.isfinite(x):
            return Cell(str(x), bits)
        return Cell(format_real(x, bits), bits)
    if isinstance(x, mpmath.mpc):
        raise TypeError("complex cells are not supported; store real and imaginary parts separately")
    raise TypeError(f"cannot store {type(x).__name__} in a report cell")


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} cells, table has {len(self.columns)} columns")
        self.rows.append([make_cell(v) for v in values])

    def values(self) -> list:
        return [[c.parse() for c in row] for row in self.rows]


@dataclass
class Certificate:
    name: str
    range: str
    verdict: str
    certified: bool
    constants: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        self.constants = {k: make_cell(v) for k, v in self.constants.items()}

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "range": self.range,
            "verdict": self.verdict,
            "certified": self.certified,
            "constants": {k: v.to_json() for k, v in self.constants.items()},
            "flags": list(self.flags),
        }


@dataclass
class Report:
    command: str
    metadata: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    certificates: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def table(self, name: str, columns: list) -> Table:
        if name in self.tables:
            raise ValueError(f"table {name!r} already exists")
        t = Table(list(columns))
        self.tables[name] = t
        return t

    def certify(self, name: str, range: str, passed, certified: bool = True, constants=None, flags=None,
                verdict: str | None = None) -> Certificate:
        if verdict is None:
            verdict = "pass" if passed else "fail"
        cert = Certificate(name, range, verdict, bool(certified), dict(constants or {}), list(flags or []))
        self.certificates.append(cert)
        return cert

    def error(self, where: str, exc: BaseException) -> None:
        self.errors.append({"where": where, "type": type(exc).__name__, "message": str(exc)})

    @property
    def failed_verdicts(self) -> list:
        return [c.name for c in self.certificates if c.verdict == "fail"]

    @property
    def exit_code(self) -> int:
        return 0 if not self.failed_verdicts and not self.errors else 1

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "metadata": _plain(self.metadata),
            "tables": {
                name: {"columns": t.columns, "rows": [[c.to_json() for c in row] for row in t.rows]}
                for name, t in self.tables.items()
            },
            "certificates": [c.to_json() for c in self.certificates],
            "errors": list(self.errors),
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, ExactScalar):
        return format_exact(obj)
    if isinstance(obj, mpmath.mpf):
        return mpmath.nstr(obj, 15)
    return str(obj)


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def dumps_json(report: Report) -> str:
    return json.dumps(report.to_json(), sort_keys=True, indent=1) + "\n"


def _column_precision(table: Table, i: int) -> str:
    tags = {str(row[i].precision) for row in table.rows if row[i].precision != "none"}
    if not tags:
        return "none"
    return tags.pop() if len(tags) == 1 else "mixed"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def csv_documents(report: Report) -> dict:
    """File name -> CSV text; tables, their column tags, certificates and errors."""
    docs = {}
    meta = _plain(report.metadata)
    flat = []

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(f"{prefix}.{k}" if prefix else k, obj[k])
        else:
            flat.append([prefix, json.dumps(obj) if not isinstance(obj, str) else obj])

    walk("", {"command": report.command, **meta})
    docs["metadata.csv"] = _csv_text(["key", "value"], flat)
    if report.tables:
        cols = []
        for name, t in report.tables.items():
            docs[f"{name}.csv"] = _csv_text(t.columns, [[c.text for c in row] for row in t.rows])
            cols.extend([name, col, _column_precision(t, i)] for i, col in enumerate(t.columns))
        docs["columns.csv"] = _csv_text(["table", "column", "precision"], cols)
    if report.certificates:
        rows = []
        for c in report.certificates:
            consts = ";".join(f"{k}={v.text}" for k, v in c.constants.items())
            rows.append([c.name, c.range, c.verdict, "certified" if c.certified else "uncertified",
                         consts, ";".join(c.flags)])
        docs["certificates.csv"] = _csv_text(["name", "range", "verdict", "certified", "constants", "flags"], rows)
    if report.errors:
        docs["errors.csv"] = _csv_text(["where", "type", "message"],
                                       [[e["where"], e["type"], e["message"]] for e in report.errors])
    return docs


def emit(report: Report, fmt: str, path: str | None) -> list:
    """Write the report; returns the files written (empty when printing to stdout)."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}; use csv or json")
    if path is None:
        import sys

        if fmt == "json":
            sys.stdout.write(dumps_json(report))
        else:
            for name, text in csv_documents(report).items():
                sys.stdout.write(f"# {name}\n{text}")
        return []
    try:
        os.makedirs(path, exist_ok=True)
        written = []
        docs = {"report.json": dumps_json(report)} if fmt == "json" else csv_documents(report)
        for name, text in docs.items():
            target = os.path.join(path, name)
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            written.append(target)
        return written
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def load_report(path: str) -> dict:
    """Re-read a JSON report; table cells come back as their Python values."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for t in doc["tables"].values():
        t["values"] = [[Cell(c["value"], c["precision"]).parse() for c in row] for row in t["rows"]]
    for c in doc["certificates"]:
        c["values"] = {k: Cell(v["value"], v["precision"]).parse() for k, v in c["constants"].items()}
    return doc
