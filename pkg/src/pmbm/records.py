"""Line-delimited JSON files for scenarios and estimates, CSV/JSON results."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .metrics import estimate_from_dict
from .sim import GroundTruth, TruthObject

RESULT_COLUMNS = ("step", "rms_total", "rms_loc", "rms_missed", "rms_false")


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_scenario(path, truth: GroundTruth, scans=None):
    recs = []
    for k in range(1, truth.steps + 1):
        rec = {"step": k, "truth": [o.to_dict() for o in truth.at(k)]}
        if scans is not None:
            rec["measurements"] = np.asarray(scans[k - 1]).tolist()
        recs.append(rec)
    write_jsonl(path, recs)


def read_scenario(path):
    """``(GroundTruth, scans or None)`` from a scenario file."""
    recs = sorted(read_jsonl(path), key=lambda r: r["step"])
    per_step = [[TruthObject.from_dict(o) for o in r.get("truth", [])] for r in recs]
    scans = None
    if recs and all("measurements" in r for r in recs):
        scans = [np.asarray(r["measurements"], dtype=float).reshape(-1, 2) for r in recs]
    return GroundTruth.from_steps(per_step), scans


def write_estimates(path, estimates):
    write_jsonl(path, ({"step": k, "estimates": [e.to_dict() for e in est]}
                       for k, est in enumerate(estimates, start=1)))


def read_estimates(path):
    recs = sorted(read_jsonl(path), key=lambda r: r["step"])
    return [[estimate_from_dict(e) for e in r["estimates"]] for r in recs]


def write_results(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row in rows:
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def write_summary(path, summary):
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
