"""JSONL metric streams: one event per line, machine-diffable.

Events carry deterministic fields only; the wall-clock timestamp, when
requested, is isolated in a trailing ``ts`` field so two runs of the same
seeded command differ in nothing else (``canonical_lines`` strips it for
byte-level comparisons).
"""

from __future__ import annotations

import json
import time


def write_jsonl(path, rows, *, timestamps: bool = True):
    with open(path, "w") as fh:
        for row in rows:
            out = dict(row)
            if timestamps:
                out["ts"] = time.time()
            fh.write(json.dumps(out) + "\n")


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def canonical_lines(path) -> list[str]:
    """Lines with the ts field removed, for reproducibility comparisons."""
    out = []
    for row in read_jsonl(path):
        row.pop("ts", None)
        out.append(json.dumps(row))
    return out
