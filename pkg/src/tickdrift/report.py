"""Versioned CSV output with provenance headers, plus per-directory column docs."""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

SCHEMA_VERSION = 1

# column docs, keyed by schema name; used for the README written next to the data
COLUMNS = {
    "drift_sections": {
        "index": "atomic section number, in start order",
        "start_ns": "section start, ns from simulation origin",
        "duration_ns": "section length A, ns",
        "phase_ns": "time since the last SysTick expiration when the section starts",
        "lost_ticks": "expirations discarded by the single pending bit",
        "cumulative_lost_ticks": "running sum of lost_ticks",
    },
    "drift_summary": {"quantity": "name of the summary quantity", "value": "its value"},
    "montecarlo": {
        "duration_ns": "section length A",
        "a_over_t": "A divided by the tick period",
        "samples": "number of uniform phases drawn",
        "mean": "sample mean of lost ticks",
        "stderr": "standard error of the mean",
        "expected": "exact expectation max(0, A/T - 1)",
        "within_3se": "1 if |mean - expected| <= 3 stderr",
    },
    "sim_summary": {
        "mode": "baseline, uncompensated or compensated",
        "wall_ticks": "SysTick expirations during the run",
        "kernel_ticks": "advance of the RTOS tick counter (wraps unfolded)",
        "final_drift_ticks": "wall_ticks - kernel_ticks",
        "final_drift_ms": "final drift in milliseconds",
        "delivered": "expirations delivered to a handler",
        "discarded": "expirations lost while one was already pending",
        "pending_at_end": "1 if an expiration was still pending when the run stopped",
        "sweeps": "reconstruction sweeps performed",
        "sweep_faults": "sweeps aborted on an address fault",
    },
    "events": {
        "time_ns": "event time",
        "kind": "TickExpired, TickDelivered or TickDiscarded",
        "target": "handler that received a delivery (nonsecure/secure), empty otherwise",
    },
    "sweeps": {
        "index": "window number",
        "n": "ticks intercepted by the secure handler",
        "promoted": "task ids made ready, space separated, in promotion order",
        "rotations": "round-robin rotations m",
        "new_slice": "residual slice s' written back",
        "rotated": "1 if a rotation changed the ready list",
        "reschedule": "1 if a context switch was requested",
        "overflow": "1 if the counter wrapped during the window",
        "faults": "rejected addresses, space separated",
    },
    "releases": {
        "task": "task id",
        "time_ns": "wall time the job started",
        "tick": "kernel tick (wraps unfolded) when the job started",
        "nominal_tick": "tick the release was due at (wrapped)",
    },
    "drift_samples": {
        "time_s": "wall time of the sample",
        "wall_ticks": "expirations so far",
        "kernel_ticks": "kernel counter advance so far",
        "drift_ticks": "wall_ticks - kernel_ticks",
        "drift_ms": "drift in milliseconds",
    },
    "series": {
        "time_s": "wall time of the sample",
        "reference": "reference trajectory at wall time (rad/s for speed, rad for position)",
        "state": "plant output, omega or theta",
        "command_u": "actuator voltage held by the controller",
        "tick_count": "kernel tick counter advance at the sample",
        "mode": "execution mode",
    },
    "plant_metrics": {
        "mode": "execution mode",
        "rmse": "root mean square tracking error over the full run",
        "mean_abs_err": "mean |error| after the transient",
        "peak_abs_err": "peak |error| after the transient",
        "max_state_dev": "max |state - baseline state| over the run",
        "max_command_dev": "max |u - baseline u| over the run",
        "window_state_dev": "max state deviation inside the comparison window",
        "window_command_dev": "max command deviation inside the comparison window",
        "releases": "number of control releases",
        "final_drift_ticks": "kernel drift at run end",
    },
    "rates": {
        "rate_hz": "secure check rate",
        "duration_ms": "check duration",
        "simulated_ticks_per_s": "uncompensated drift over one simulated second",
        "expected_ticks_per_s": "analytic expectation for uniform phases",
    },
    "oracle": {"quantity": "summary quantity or mismatch field", "value": "its value"},
    "comparison": {
        "scenario": "scenario name within the bundle",
        "mode": "execution mode",
        "metric": "compared quantity",
        "value": "its value",
    },
}


def fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, schema: str, digest: str, rows, columns=None, notes=()) -> Path:
    columns = list(columns or COLUMNS[schema])
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: tickdrift.{schema}/v{SCHEMA_VERSION}\n")
        fh.write(f"# config_hash: {digest}\n")
        for note in notes:
            fh.write(f"# {note}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            values = [row[c] for c in columns] if isinstance(row, dict) else row
            w.writerow([fmt(v) for v in values])
    return path


def read_csv(path: Path) -> tuple[dict, list[dict]]:
    """Header metadata and rows; the inverse of :func:`write_csv` up to string values."""
    meta, lines = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# ") and ":" in line and not lines:
                key, _, val = line[2:].partition(":")
                meta[key.strip()] = val.strip()
            elif not line.startswith("#"):
                lines.append(line)
    return meta, list(csv.DictReader(lines))


def write_json(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")
    return path


def write_column_readme(out: Path, files: dict[str, str]) -> Path:
    """``files`` maps file name -> schema name."""
    lines = ["# Output columns", "",
             "Every CSV starts with `#` comment lines (schema version, config hash, notes)",
             "followed by a header row. Times are wall-clock unless stated otherwise.", ""]
    for name in sorted(files):
        schema = files[name]
        lines += [f"## {name}", "", f"schema `tickdrift.{schema}/v{SCHEMA_VERSION}`", ""]
        lines += [f"- `{col}`: {desc}" for col, desc in COLUMNS[schema].items()]
        lines.append("")
    path = out / "COLUMNS.md"
    path.write_text("\n".join(lines))
    return path
