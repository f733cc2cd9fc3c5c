"""Gap metrics and result tables.

results.csv carries one row per instance with the fixed header
``instance,method,cost,baseline,gap,time_s``; results.json mirrors the
rows and adds the config fingerprint plus per-method means.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

CSV_HEADER = ["instance", "method", "cost", "baseline", "gap", "time_s"]


@dataclass(eq=False)
class EvalRecord:
    instance: int
    method: str
    cost: float
    baseline: float
    gap: float
    time_s: float
    fingerprint: str = ""


def compute_gap(cost: float, baseline: float, sense: str) -> float:
    """Relative gap against a baseline.

    Minimization reports (cost - baseline) / baseline, maximization the
    mirror image, so positive gaps always mean "worse than baseline".
    """
    if baseline <= 0:
        raise ValueError(f"baseline must be > 0, got {baseline}")
    if sense == "min":
        return (cost - baseline) / baseline
    if sense == "max":
        return (baseline - cost) / baseline
    raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")


def summarize(records: list[EvalRecord]) -> dict:
    """Per-method mean cost, gap, and time plus instance counts."""
    out: dict[str, dict] = {}
    for r in records:
        m = out.setdefault(
            r.method, {"count": 0, "cost": 0.0, "gap": 0.0, "time_s": 0.0}
        )
        m["count"] += 1
        m["cost"] += r.cost
        m["gap"] += r.gap
        m["time_s"] += r.time_s
    for m in out.values():
        c = m["count"]
        m["mean_cost"] = m.pop("cost") / c
        m["mean_gap"] = m.pop("gap") / c
        m["total_time_s"] = m.pop("time_s")
    return out


def write_results(csv_path, json_path, records: list[EvalRecord]) -> None:
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.instance, r.method, repr(r.cost), repr(r.baseline),
                 repr(r.gap), repr(r.time_s)]
            )
    payload = {
        "fingerprint": records[0].fingerprint if records else "",
        "records": [asdict(r) for r in records],
        "summary": summarize(records),
    }
    with open(json_path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def write_trial_trace(path, trace) -> None:
    """Trial index, cost, and running minimum per search trial."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["trial", "cost", "running_min"])
        running = float("inf")
        for i, cost in enumerate(trace):
            running = min(running, float(cost))
            writer.writerow([i, repr(float(cost)), repr(running)])
