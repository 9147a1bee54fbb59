"""Sweep execution and machine-readable result output.

The CSV column order is a stable, documented contract (the plotting
front-end refuses anything else):

    mode,benchmark,latency_ns,seed,exec_cycles,normalized_time,mlp,ipc,
    asmc_messages,guard_time_fraction,verify

normalized_time is exec_cycles divided by the baseline run at 100 ns for
the same benchmark and seed; the field is empty when that reference row is
not part of the sweep.
"""

from __future__ import annotations

import json
import math

from . import config as cfgmod
from . import workloads
from .machine import Machine

CSV_COLUMNS = ["mode", "benchmark", "latency_ns", "seed", "exec_cycles",
               "normalized_time", "mlp", "ipc", "asmc_messages",
               "guard_time_fraction", "verify"]
CSV_HEADER = ",".join(CSV_COLUMNS)

REFERENCE_LATENCY_NS = 100


def run_point(cfg: dict, mode: str, latency_ns: float) -> dict:
    """One isolated simulation; returns the raw metrics row."""
    workload = workloads.build(cfg["benchmark"]["name"], cfg["seed"],
                               cfgmod.benchmark_overrides(cfg))
    machine = Machine(cfgmod.machine_config(cfg, mode, latency_ns), workload)
    return machine.run()


def run_sweep(cfg: dict) -> list[dict]:
    modes = cfg["sweep"]["modes"] or [cfg["mode"]]
    latencies = cfg["sweep"]["latencies_ns"] or [cfg["far_link"]["base_latency_ns"]]
    rows = []
    for mode in modes:
        for lat in latencies:
            rows.append(run_point(cfg, mode, lat))
    normalize(rows)
    return rows


def normalize(rows: list[dict]) -> None:
    refs = {}
    for row in rows:
        if row["mode"] == "baseline" and row["latency_ns"] == REFERENCE_LATENCY_NS:
            refs[(row["benchmark"], row["seed"])] = row["exec_cycles"]
    for row in rows:
        ref = refs.get((row["benchmark"], row["seed"]))
        row["normalized_time"] = (row["exec_cycles"] / ref) if ref else None


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "pass" if value else "fail"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def rows_to_csv(rows: list[dict]) -> str:
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def write_csv(rows: list[dict], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(rows_to_csv(rows))


def summarize(rows: list[dict]) -> dict:
    """Aggregates per mode: geometric-mean normalized time and mean MLP/IPC."""
    by_mode: dict[str, list[dict]] = {}
    for row in rows:
        by_mode.setdefault(row["mode"], []).append(row)
    summary = {}
    for mode, mrows in by_mode.items():
        norm = [r["normalized_time"] for r in mrows if r["normalized_time"]]
        summary[mode] = {
            "points": len(mrows),
            "geomean_normalized_time": (
                math.exp(sum(math.log(x) for x in norm) / len(norm)) if norm else None),
            "mean_mlp": sum(r["mlp"] for r in mrows) / len(mrows),
            "mean_ipc": sum(r["ipc"] for r in mrows) / len(mrows),
            "verify_failures": sum(0 if r["verify"] else 1 for r in mrows),
        }
    return summary


def write_summary(rows: list[dict], path: str) -> None:
    with open(path, "w") as fh:
        json.dump(summarize(rows), fh, indent=2, sort_keys=True)
        fh.write("\n")
