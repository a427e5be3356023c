"""Figure rendering for simulation reports.

Reads the long-format metric table (one or more runs) and writes one PNG per
metric next to the delimited output. Runs at several sample sizes are drawn
as lines against n; a single run becomes grouped bars per coordinate.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["read_long_csv", "render_figures"]

_METRIC_LABELS = {
    "type_i": "Type-I error",
    "power": "Power",
    "coverage": "95% CI coverage",
    "rmse": "RMSE",
    "psi_rmse": "Random-effect variance RMSE",
    "psi_err_median": "Median random-effect variance error",
    "sigma_e2_rmse": "Noise variance RMSE",
    "mcc": "Selection MCC",
}
_REFLINES = {"type_i": 0.05, "coverage": 0.95}


def read_long_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            row["value"] = float(row["value"]) if row["value"] else float("nan")
            row["n"] = int(row["n"])
            rows.append(row)
    return rows


def _coord_label(c) -> str:
    return f"coef {int(c) + 1}" if c not in ("", "-1") else "all"


def render_figures(long_rows, out_dir, dpi: int = 120) -> list[Path]:
    """One figure per metric; returns the written paths (sorted)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_metric = defaultdict(list)
    for row in long_rows:
        by_metric[row["metric"]].append(row)

    written = []
    for metric in sorted(by_metric):
        rows = by_metric[metric]
        ns = sorted({r["n"] for r in rows})
        methods = sorted({r["method"] for r in rows})
        fig, ax = plt.subplots(figsize=(7.0, 4.2))
        if len(ns) > 1:
            # multiple runs: value against n, one line per (method, coordinate)
            series = defaultdict(dict)
            for r in rows:
                series[(r["method"], r["coordinate"])][r["n"]] = r["value"]
            for (method, coord), vals in sorted(series.items()):
                xs = [n for n in ns if n in vals]
                ax.plot(xs, [vals[n] for n in xs], marker="o",
                        label=f"{method}, {_coord_label(coord)}")
            ax.set_xlabel("number of subjects n")
        else:
            coords = sorted({r["coordinate"] for r in rows}, key=lambda c: (c == "", str(c)))
            width = 0.8 / max(len(methods), 1)
            for mi, method in enumerate(methods):
                vals = {r["coordinate"]: r["value"] for r in rows if r["method"] == method}
                xs = [ci + mi * width for ci in range(len(coords))]
                ax.bar(xs, [vals.get(c, float("nan")) for c in coords], width=width,
                       label=method)
            ax.set_xticks([ci + 0.4 - width / 2 for ci in range(len(coords))])
            ax.set_xticklabels([_coord_label(c) for c in coords], rotation=45, ha="right")
        if metric in _REFLINES:
            ax.axhline(_REFLINES[metric], color="red", lw=0.8, ls="--")
        ax.set_ylabel(_METRIC_LABELS.get(metric, metric))
        ax.set_title(_METRIC_LABELS.get(metric, metric))
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"{metric}.png"
        fig.savefig(path, dpi=dpi)
        plt.close(fig)
        written.append(path)
    return written
