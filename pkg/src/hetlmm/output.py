"""Deterministic CSV/JSON writers for results.

Floats are written with shortest round-trip formatting and JSON keys are
sorted, so rerunning a command with identical inputs rewrites byte-identical
files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__all__ = [
    "write_csv",
    "write_json",
    "write_inference_csv",
    "write_graph_outputs",
    "write_sim_report",
]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, fieldnames, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(fieldnames)
        for row in rows:
            if isinstance(row, dict):
                w.writerow([_cell(row.get(f)) for f in fieldnames])
            else:
                w.writerow([_cell(v) for v in row])
    return path


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")
    return path


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v)}")


def write_inference_csv(path, records, p_holm=None):
    """Per-coordinate inference table; optionally with Holm-adjusted p-values."""
    fields = ["coord", "beta_hat", "beta_db", "se", "ci_low", "ci_high", "p_value", "p_holm"]
    rows = []
    for i, r in enumerate(records):
        rows.append({
            "coord": r.coord, "beta_hat": r.beta_hat, "beta_db": r.beta_db, "se": r.se,
            "ci_low": r.ci_low, "ci_high": r.ci_high, "p_value": r.p_value,
            "p_holm": None if p_holm is None else float(p_holm[i]),
        })
    return write_csv(path, fields, rows)


def write_graph_outputs(graph, out_dir):
    """edges.csv, adjacency.csv, and summary.json for a fitted graph."""
    out_dir = Path(out_dir)
    fields = ["node_a", "node_b", "strength", "se", "p_value", "p_holm",
              "significant", "heterogeneity"]
    write_csv(out_dir / "edges.csv", fields, graph.edges())
    p = graph.p
    adj_rows = [[int(graph.adjacency[j, k]) for k in range(p)] for j in range(p)]
    write_csv(out_dir / "adjacency.csv", [f"node_{k}" for k in range(p)], adj_rows)
    n_edges = int(np.sum(graph.adjacency) // 2)
    total = p * (p - 1) // 2
    write_json(out_dir / "summary.json", {
        "nodes": p,
        "significant_edges": n_edges,
        "possible_edges": total,
        "density": n_edges / total if total else 0.0,
        "alpha": graph.alpha,
        "failures": list(graph.failures),
    })
    return out_dir


def write_sim_report(report, out_dir):
    """All simulation tables: metrics, varcomp, long format, raw log, summary."""
    out_dir = Path(out_dir)
    write_csv(out_dir / "metrics.csv",
              ["method", "coord", "beta_true", "psi_true", "type_i", "power",
               "coverage", "rmse", "n_ok", "n_failed"],
              report.coord_rows)
    if report.varcomp_rows:
        write_csv(out_dir / "varcomp.csv",
                  ["method", "psi_rmse", "psi_err_median", "sigma_e2_rmse", "mcc",
                   "n_ok", "n_failed"],
                  report.varcomp_rows)
    write_csv(out_dir / "long.csv",
              ["method", "metric", "coordinate", "value", "model", "n", "m", "p", "reps"],
              report.long_rows())
    write_csv(out_dir / "raw.csv",
              ["rep", "method", "coord", "est", "se", "p", "rejected", "covered"],
              report.raw_rows)
    write_json(out_dir / "summary.json", {
        "config": json.loads(report.config.to_json()),
        "n_failures": len(report.failures),
        "failures": report.failures[:200],
    })
    return out_dir
