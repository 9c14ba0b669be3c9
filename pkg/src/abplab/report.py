"""Structured outcome of a verification suite."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

SUMMARY_HEADER = ("suite", "operator", "samples", "min_slack", "tol", "pass", "witness")


@dataclass
class CheckReport:
    """Result of one suite run against one operator (or one grid problem).

    ``min_slack`` is normalized by the per-suite scale named in
    ``params["scale"]``; the suite passes iff ``min_slack >= -tolerance``.
    A skipped suite never passes.
    """

    suite: str
    operator: str
    samples: int
    min_slack: float
    tolerance: float
    witness: Any = None
    params: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    skipped: str | None = None
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        if self.skipped is not None or math.isnan(self.min_slack):
            return False
        return bool(self.min_slack >= -self.tolerance)

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "suite": self.suite,
            "operator": self.operator,
            "samples": self.samples,
            "min_slack": _json_float(self.min_slack),
            "tolerance": self.tolerance,
            "pass": self.passed,
            "witness": _jsonable(self.witness),
            "params": _jsonable(self.params),
            "notes": list(self.notes),
            "skipped": self.skipped,
        }
        if timing:
            out["elapsed"] = self.elapsed
        return out

    def to_json(self, timing: bool = False) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True)

    def csv_row(self, witness_ref: str = "") -> list:
        return [self.suite, self.operator, self.samples, repr(float(self.min_slack)), repr(self.tolerance),
                "pass" if self.passed else "fail", witness_ref]


class SlackTracker:
    """Running minimum of slacks; ties keep the earliest sample (deterministic)."""

    def __init__(self):
        self.min_slack = math.inf
        self.witness = None
        self.count = 0

    def update(self, slack: float, witness) -> None:
        self.count += 1
        if slack < self.min_slack or (math.isnan(slack) and not math.isnan(self.min_slack)):
            self.min_slack = float(slack)
            self.witness = witness


def _json_float(x):
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return x


def _jsonable(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return _json_float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def merge_reports(reports) -> list[list]:
    """Summary rows ordered by ``(suite, operator)``.

    Repeated ``(suite, operator)`` ids get ``#2``, ``#3``... suffixes on the
    suite name, numbered in input order.
    """
    seen: dict[tuple, int] = {}
    keyed = []
    for i, r in enumerate(reports):
        key = (r.suite, r.operator)
        seen[key] = seen.get(key, 0) + 1
        suite = r.suite if seen[key] == 1 else f"{r.suite}#{seen[key]}"
        keyed.append(((suite, r.operator, i), suite, r))
    keyed.sort(key=lambda item: item[0])
    rows = []
    for (_, _, i), suite, r in keyed:
        row = r.csv_row(f"report.json#/reports/{i}/witness" if r.witness is not None else "")
        row[0] = suite
        rows.append(row)
    return rows


def summary_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    writer.writerows(merge_reports(reports))
    return buf.getvalue()
