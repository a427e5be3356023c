"""Command-line front end.

Subcommands: fit, infer, varcomp, graph, mevar, simulate, report. Inputs are
JSON manifests / configs, outputs are CSV tables plus JSON summaries (and
PNG figures on the report path). Exit codes: 0 success, 2 input/config
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DataError, load_manifest
from .errors import NumericalError
from .graph import GraphConfig, downsample_series, fit_graph
from .inference import debias, fit_projection, holm_adjust
from .lasso import DEFAULT_A_GRID, fit_cv
from .mevar import MevarConfig, fit_mevar
from .output import write_csv, write_graph_outputs, write_inference_csv, write_json, write_sim_report
from .simulate import SimConfig, run_monte_carlo
from .varcomp import run_varcomp_pipeline

log = logging.getLogger("hetlmm")

EXIT_OK = 0
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _parse_a(text: str):
    return "cv" if text == "cv" else float(text)


def _parse_grid(text: str):
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip() != "")
    except ValueError:
        raise DataError(f"invalid a-grid: {text!r}") from None


def _default_threads() -> int:
    env = os.environ.get("HETLMM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise DataError(f"HETLMM_THREADS is not an integer: {env!r}") from None
    return os.cpu_count() or 1


def _add_common(sub, with_a=True):
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--alpha", type=float, default=0.05)
    sub.add_argument("--threads", type=int, default=None,
                     help="worker processes (default: HETLMM_THREADS or all cores)")
    sub.add_argument("--verbose", action="store_true")
    if with_a:
        sub.add_argument("--a", type=_parse_a, default="cv",
                         help='decorrelation constant, or "cv" (default)')
        sub.add_argument("--a-grid", type=_parse_grid, default=DEFAULT_A_GRID,
                         help="comma-separated candidates for --a cv")


def _load_matrix_blocks(manifest_path):
    """Manifest of per-subject node/series matrices (every column is a node)."""
    from .dataset import _parse_subject_csv

    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        spec = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{manifest_path}: invalid JSON ({e})") from None
    if "subjects" not in spec:
        raise DataError(f"{manifest_path}: manifest needs a 'subjects' list")
    base = manifest_path.parent
    blocks = []
    for entry in spec["subjects"]:
        path = Path(entry["path"] if isinstance(entry, dict) else entry)
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise DataError(f"subject file not found: {path}")
        blocks.append(_parse_subject_csv(path))
    return blocks


def _cv_report_rows(report):
    rows = []
    for (a, lam), mse in zip(report.grid, report.cv_mse):
        rows.append({"a": a, "lambda": lam, "cv_mse": float(mse),
                     "chosen": (a, lam) == report.chosen})
    return rows


def cmd_fit(args) -> int:
    dataset = load_manifest(args.manifest)
    fit, report, _ = fit_cv(dataset, a=args.a, a_grid=args.a_grid, seed=args.seed)
    out = Path(args.out)
    write_csv(out / "beta.csv", ["coord", "estimate"],
              [{"coord": j, "estimate": float(b)} for j, b in enumerate(fit.beta)])
    write_csv(out / "cv_report.csv", ["a", "lambda", "cv_mse", "chosen"],
              _cv_report_rows(report))
    log.info("fit: a=%s lambda=%.6g, %d active coefficients",
             fit.a, fit.lam, len(fit.active_set))
    return EXIT_OK


def cmd_infer(args) -> int:
    dataset = load_manifest(args.manifest)
    coords = (list(range(dataset.p)) if args.coords == "all"
              else [int(c) for c in args.coords.split(",")])
    fit, report, _ = fit_cv(dataset, a=args.a, a_grid=args.a_grid, seed=args.seed)
    records = []
    for coord in coords:
        proj = fit_projection(dataset, coord, a=fit.a, seed=args.seed + coord)
        records.append(debias(dataset, coord, fit, proj, alpha=args.alpha))
    p_holm = holm_adjust([r.p_value for r in records])
    out = Path(args.out)
    write_inference_csv(out / "inference.csv", records, p_holm)
    write_csv(out / "cv_report.csv", ["a", "lambda", "cv_mse", "chosen"],
              _cv_report_rows(report))
    return EXIT_OK


def cmd_varcomp(args) -> int:
    dataset = load_manifest(args.manifest)
    est = run_varcomp_pipeline(dataset, seed=args.seed, a=args.a, a_grid=args.a_grid,
                               nonnegative=args.nonnegative)
    out = Path(args.out)
    write_csv(out / "psi.csv", ["index", "estimate"],
              [{"index": j, "estimate": float(v)} for j, v in enumerate(est.psi_hat)])
    write_json(out / "varcomp_summary.json", {
        "sigma_e2": est.sigma_e2_hat,
        "sigma_e2_floored": est.sigma_e2_floored,
        "lambda_theta": est.lambda_theta,
        "selected": list(est.selected),
        "chosen_a": est.chosen_a,
        "chosen_lambda": est.chosen_lambda,
        "split_sizes": est.split.sizes(),
    })
    return EXIT_OK


def cmd_graph(args) -> int:
    blocks = _load_matrix_blocks(args.manifest)
    if args.downsample > 1:
        blocks = [downsample_series(b, args.downsample) for b in blocks]
    config = GraphConfig(a=args.a, a_grid=args.a_grid, alpha=args.alpha, seed=args.seed,
                         with_heterogeneity=args.heterogeneity)
    graph = fit_graph(blocks, config)
    write_graph_outputs(graph, args.out)
    if graph.failures:
        log.warning("graph completed with %d edge/node failures", len(graph.failures))
    return EXIT_OK


def cmd_mevar(args) -> int:
    series = _load_matrix_blocks(args.manifest)
    rows = None if args.rows == "all" else tuple(int(r) for r in args.rows.split(","))
    config = MevarConfig(a=args.a, a_grid=args.a_grid, alpha=args.alpha, seed=args.seed,
                         rows=rows)
    result = fit_mevar(series, config)
    out = Path(args.out)
    p = result.phi.shape[0]
    write_csv(out / "phi.csv", [f"node_{k}" for k in range(p)],
              [list(result.phi[r]) for r in range(p)])
    recs = [result.records[key] for key in sorted(result.records)]
    keys = sorted(result.records)
    rows_out = []
    p_holm = holm_adjust([r.p_value for r in recs]) if recs else []
    for (row, col), rec, ph in zip(keys, recs, p_holm):
        rows_out.append({"row": row, "col": col, "beta_hat": rec.beta_hat,
                         "beta_db": rec.beta_db, "se": rec.se, "ci_low": rec.ci_low,
                         "ci_high": rec.ci_high, "p_value": rec.p_value,
                         "p_holm": float(ph)})
    write_csv(out / "inference.csv",
              ["row", "col", "beta_hat", "beta_db", "se", "ci_low", "ci_high",
               "p_value", "p_holm"], rows_out)
    write_json(out / "summary.json", {
        "spectral_norm": result.spectral_norm,
        "chosen_a": {str(k): v for k, v in result.chosen_a.items()},
        "failures": list(result.failures),
    })
    return EXIT_OK


def cmd_simulate(args) -> int:
    config_path = Path(args.config)
    if not config_path.exists():
        raise DataError(f"config not found: {config_path}")
    config = SimConfig.from_json(config_path.read_text(encoding="utf-8"))
    if args.threads is not None or config.threads == 1:
        from dataclasses import replace
        config = replace(config, threads=args.threads or _default_threads())
    report = run_monte_carlo(config)
    write_sim_report(report, args.out)
    if args.figures:
        from .report import render_figures
        render_figures(report.long_rows(), Path(args.out) / "figures")
    log.info("simulate: %d replicates, %d failures", config.reps, len(report.failures))
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import read_long_csv, render_figures

    rows = []
    for path in args.long:
        if not Path(path).exists():
            raise DataError(f"long-format table not found: {path}")
        rows.extend(read_long_csv(path))
    written = render_figures(rows, args.out)
    log.info("report: wrote %d figures", len(written))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetlmm", description=__doc__)
    ap.add_argument("--version", action="version", version=f"hetlmm {__version__}")
    subs = ap.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("fit", help="decorrelated LASSO fit with CV tuning")
    sp.add_argument("--manifest", required=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_fit)

    sp = subs.add_parser("infer", help="de-biased inference for coordinates")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--coords", default="all", help='comma-separated list or "all"')
    _add_common(sp)
    sp.set_defaults(func=cmd_infer)

    sp = subs.add_parser("varcomp", help="variance components via three-way split")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--nonnegative", action="store_true",
                    help="clip negative psi estimates to zero")
    _add_common(sp)
    sp.set_defaults(func=cmd_varcomp)

    sp = subs.add_parser("graph", help="heterogeneous graphical model over nodes")
    sp.add_argument("--manifest", required=True, help="manifest of node matrices")
    sp.add_argument("--downsample", type=int, default=1)
    sp.add_argument("--heterogeneity", action="store_true")
    _add_common(sp)
    sp.set_defaults(func=cmd_graph)

    sp = subs.add_parser("mevar", help="mixed-effect VAR(1) estimation/inference")
    sp.add_argument("--manifest", required=True, help="manifest of series matrices")
    sp.add_argument("--rows", default="all", help='comma-separated rows or "all"')
    _add_common(sp)
    sp.set_defaults(func=cmd_mevar)

    sp = subs.add_parser("simulate", help="Monte Carlo study from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--figures", action="store_true", help="render PNG figures too")
    _add_common(sp, with_a=False)
    sp.set_defaults(func=cmd_simulate)

    sp = subs.add_parser("report", help="render figures from long-format tables")
    sp.add_argument("--long", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(over="raise", invalid="ignore")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
