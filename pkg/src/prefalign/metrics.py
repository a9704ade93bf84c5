"""Preference-accuracy protocols and run summaries.

Two pairwise accuracy protocols: ``tau`` scores exact matches over all
records (a TIE label must be answered TIE to count); ``diff`` drops
tie-labeled records and scores the rest (a TIE prediction on a kept record is
simply wrong).  Both are order-invariant fractions in [0, 1].
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from .errors import InputError, UndefinedResultError
from .tokens import Verdict


@dataclass(frozen=True)
class PrefRecord:
    prediction: Verdict
    label: Verdict


def preference_accuracy(records, mode: str) -> float:
    """Fraction of correct pairwise predictions under the given protocol."""
    records = list(records)
    if not records:
        raise InputError("no records")
    if mode == "tau":
        return sum(r.prediction == r.label for r in records) / len(records)
    if mode == "diff":
        kept = [r for r in records if r.label != Verdict.TIE]
        if not kept:
            raise UndefinedResultError("diff accuracy is undefined when every label is a tie")
        return sum(r.prediction == r.label for r in kept) / len(kept)
    raise InputError(f"unknown mode {mode!r}")


def dim_accuracy(predictions, labels) -> float:
    """Exact-match fraction between two equal-length ordinal lists."""
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise InputError("length mismatch")
    if not predictions:
        raise InputError("empty lists")
    return sum(p == l for p, l in zip(predictions, labels)) / len(predictions)


# --- run summaries ------------------------------------------------------------------


@dataclass
class RunReport:
    n_rows: int = 0
    n_malformed: int = 0
    malformed_lines: list[tuple[int, str]] = field(default_factory=list)
    first: dict = field(default_factory=dict)
    last: dict = field(default_factory=dict)
    means: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"rows: {self.n_rows}", f"malformed: {self.n_malformed}"]
        for line_no, err in self.malformed_lines:
            lines.append(f"  line {line_no}: {err}")
        for key in sorted(self.means):
            lines.append(f"mean {key}: {self.means[key]:.6g}")
        for name, row in (("first", self.first), ("last", self.last)):
            for key in sorted(row):
                lines.append(f"{name} {key}: {row[key]:.6g}")
        return "\n".join(lines) + "\n"


def summarize_run(lines) -> RunReport:
    """Aggregate a JSONL metric stream: first/last values and means of every
    numeric field.  Malformed lines are recorded with their line number and
    skipped; an empty stream yields an empty report with zero counts."""
    report = RunReport()
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            row = json.loads(line)
            if not isinstance(row, dict):
                raise ValueError("not an object")
        except ValueError as exc:
            report.n_malformed += 1
            report.malformed_lines.append((line_no, str(exc)))
            continue
        numeric = {k: float(v) for k, v in row.items() if isinstance(v, (int, float)) and k != "ts"}
        report.n_rows += 1
        if report.n_rows == 1:
            report.first = dict(numeric)
        report.last = dict(numeric)
        for k, v in numeric.items():
            sums[k] = sums.get(k, 0.0) + v
            counts[k] = counts.get(k, 0) + 1
    report.means = {k: sums[k] / counts[k] for k in sums}
    return report


def summarize_run_file(path) -> RunReport:
    with open(path) as fh:
        return summarize_run(fh)


def write_curves_csv(path, rows, fields):
    """Per-step curves as CSV (one row per metric event, fixed column order)."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
