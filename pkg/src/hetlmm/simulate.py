"""Seed-driven data generators and the Monte Carlo replication driver.

Three built-in generators:

* ``lmm_section5`` - the benchmark doubly high-dimensional LMM: subject
  design rows are Gaussian with a sparse population covariance (unit
  diagonal, off-diagonals zero w.p. 0.8 else Unif(-0.5, 0.5)) perturbed per
  subject (entries selected w.p. 0.2, Gaussian noise with SD 0.1, resampled
  until positive definite), random effects N(0, diag(psi*)), noise
  N(0, sigma_e2* I).
* ``toy_table1`` - the 7-node toy network: six covariate nodes are standard
  normal and node 1 follows the neighborhood model with fixed coefficients
  (0.5, -0.4, 0.2, 0.4, 0, 0) and random-effect SDs (1.5, 0, 0.5, 0.75, 0,
  0.5); 20 subjects with 10 observations each.
* ``mevar_appendixE`` - a mixed-effect VAR(1): Phi has Unif(0.2, 0.8)
  diagonal and sparse off-diagonals, per-entry random-effect variances are
  sparse (density 0.1, Unif(0.05, 0.15)), innovation variance 0.5; subject
  coefficient draws are resampled until the process is stationary.

Every draw comes from a counter-based stream keyed by (seed, rep, subject,
purpose), so replicates can run in any order or in parallel without changing
the aggregate report.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .dataset import LmmDataset, SubjectBlock, make_neighborhood_dataset
from .errors import DataError, NumericalError
from .inference import debias, fit_projection
from .lasso import DEFAULT_A_GRID, fit_cv
from .rng import stream
from .varcomp import run_varcomp_pipeline

__all__ = [
    "MethodSpec",
    "SimConfig",
    "SimReport",
    "gen_sigma_x",
    "gen_lmm_dataset",
    "gen_toy_blocks",
    "gen_mevar_truth",
    "gen_mevar_series",
    "mcc",
    "run_replicate",
    "run_monte_carlo",
]

log = logging.getLogger(__name__)

PD_MIN_EIG = 1e-8
PD_MAX_TRIES = 1000

# benchmark truths: 1-based coefficient/variance patterns from the study design
SECTION5_BETA = {1: 1.0, 2: 0.5, 6: 0.2, 7: 0.1, 9: 0.05}
SECTION5_PSI = {1: 2.0, 4: 2.0, 7: 0.1, 9: 0.1, 10: 4.0, 12: 0.1, 16: 2.0, 20: 0.1}
HEADLINE_COORDS = (0, 1, 5, 6, 8, 9, 10, 11)  # reported beta columns, 0-based

TOY_BETA = np.array([0.5, -0.4, 0.2, 0.4, 0.0, 0.0])
TOY_RE_SD = np.array([1.5, 0.0, 0.5, 0.75, 0.0, 0.5])
TOY_N, TOY_M = 20, 10

MEVAR_SIGMA_EPS2 = 0.5
MEVAR_PHI_OFFDIAG_SD = 0.04
MEVAR_RE_DENSITY = 0.1
MEVAR_RE_RANGE = (0.05, 0.15)
MEVAR_STATIONARITY_DELTA = 0.05
MEVAR_BURN_IN = 200


@dataclass(frozen=True)
class MethodSpec:
    """One estimation/inference recipe in the method grid."""

    name: str
    a: object = "cv"           # "cv" or a fixed constant (0 = plain-LASSO baseline)
    variance: str = "sandwich"  # "sandwich" or classical "iid"
    target: str = "design"


def default_methods(model: str) -> tuple[MethodSpec, ...]:
    baseline = MethodSpec(name="dblasso", a=0.0, variance="iid")
    if model == "toy_table1":
        return (MethodSpec(name="mixed_ggm"), MethodSpec(name="fixed_ggm", a=0.0, variance="iid"))
    return (MethodSpec(name="proposed"), baseline)


@dataclass(frozen=True)
class SimConfig:
    model: str = "lmm_section5"
    reps: int = 200
    seed: int = 0
    n: int = 50
    m: int = 30
    p: int = 20
    T: int = 50
    alpha: float = 0.05
    sigma_e2_star: float = 1.0
    beta_star: tuple | None = None
    psi_star: tuple | None = None
    methods: tuple[MethodSpec, ...] | None = None
    a_grid: tuple = DEFAULT_A_GRID
    coords: tuple | None = None  # None = model default probe set
    varcomp: bool = False
    K: int = 5
    n_lambdas: int = 50
    threads: int = 1
    rows: tuple = (0,)  # VAR rows to infer
    burn_in: int = MEVAR_BURN_IN

    def __post_init__(self):
        if self.model not in ("lmm_section5", "toy_table1", "mevar_appendixE", "custom"):
            raise DataError(f"/model: unknown model {self.model!r}")
        if self.reps < 1:
            raise DataError("/reps: must be >= 1")
        for name in ("n", "m", "p", "T"):
            if getattr(self, name) < 1:
                raise DataError(f"/{name}: must be positive")
        if not 0 < self.alpha < 1:
            raise DataError("/alpha: must be in (0, 1)")
        if self.methods is None:
            object.__setattr__(self, "methods", default_methods(self.model))

    @staticmethod
    def from_json(text: str) -> "SimConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise DataError(f"config is not valid JSON: {e}") from None
        if not isinstance(raw, dict):
            raise DataError("/: config must be a JSON object")
        methods = None
        if "methods" in raw:
            methods = []
            for i, m in enumerate(raw.pop("methods")):
                if not isinstance(m, dict) or "name" not in m:
                    raise DataError(f"/methods/{i}: expected an object with a 'name'")
                try:
                    methods.append(MethodSpec(**m))
                except TypeError as e:
                    raise DataError(f"/methods/{i}: {e}") from None
            methods = tuple(methods)
        for key in ("beta_star", "psi_star", "coords", "a_grid", "rows"):
            if key in raw and raw[key] is not None:
                raw[key] = tuple(raw[key])
        try:
            return SimConfig(methods=methods, **raw)
        except TypeError as e:
            raise DataError(f"/: {e}") from None

    def to_json(self) -> str:
        d = {k: v for k, v in self.__dict__.items()}
        d["methods"] = [m.__dict__ for m in self.methods]
        for key in ("beta_star", "psi_star", "coords", "a_grid", "rows"):
            if d[key] is not None:
                d[key] = list(d[key])
        return json.dumps(d, indent=2, sort_keys=True)


def _section5_vector(pattern: dict, p: int) -> np.ndarray:
    v = np.zeros(p)
    for one_based, val in pattern.items():
        if one_based - 1 < p:
            v[one_based - 1] = val
    return v


def resolve_truth(config: SimConfig):
    """Return (beta_star, psi_star) vectors for the LMM-style models."""
    p = config.p
    beta = (np.asarray(config.beta_star, dtype=float) if config.beta_star is not None
            else _section5_vector(SECTION5_BETA, p))
    psi = (np.asarray(config.psi_star, dtype=float) if config.psi_star is not None
           else _section5_vector(SECTION5_PSI, p))
    if len(beta) != p or len(psi) != p:
        raise DataError(f"beta_star/psi_star must have length p={p}")
    if np.any(psi < 0):
        raise DataError("psi_star entries must be >= 0")
    return beta, psi


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def _draw_sigma_x(p: int, rng: np.random.Generator, max_tries: int = PD_MAX_TRIES):
    """Sparse random covariance: unit diagonal, mixture off-diagonals, PD."""
    iu = np.triu_indices(p, k=1)
    for attempt in range(max_tries):
        nonzero = rng.random(len(iu[0])) < 0.2
        off = np.zeros(len(iu[0]))
        off[nonzero] = rng.uniform(-0.5, 0.5, int(nonzero.sum()))
        S = np.eye(p)
        S[iu] = off
        S.T[iu] = off
        if np.linalg.eigvalsh(S)[0] > PD_MIN_EIG:
            return S, attempt
    raise NumericalError(f"population covariance not PD after {max_tries} draws")


def _perturb_sigma_x(Sigma_X: np.ndarray, rng: np.random.Generator,
                     max_tries: int = PD_MAX_TRIES):
    """Per-subject covariance: perturb selected upper-triangle entries, keep PD."""
    p = Sigma_X.shape[0]
    iu = np.triu_indices(p, k=1)
    for attempt in range(max_tries):
        selected = rng.random(len(iu[0])) < 0.2
        pert = np.zeros(len(iu[0]))
        pert[selected] = rng.normal(0.0, 0.1, int(selected.sum()))
        S = Sigma_X.copy()
        S[iu] += pert
        S.T[iu] = S[iu]
        if np.linalg.eigvalsh(S)[0] > PD_MIN_EIG:
            return S, attempt
    raise NumericalError(f"subject covariance not PD after {max_tries} perturbation draws")


def gen_sigma_x(p: int, seed: int):
    """Population covariance plus a per-subject perturbation handle."""
    if p < 2:
        raise DataError("need p >= 2")
    Sigma_X, tries = _draw_sigma_x(p, stream(seed, "sigma-x"))
    if tries:
        log.debug("Sigma_X resampled %d times for positive definiteness", tries)

    def perturb(subject: int) -> np.ndarray:
        S, t = _perturb_sigma_x(Sigma_X, stream(seed, "sigma-x", "subject", subject))
        if t:
            log.debug("Sigma_X^%d resampled %d times", subject, t)
        return S

    return Sigma_X, perturb


def gen_lmm_dataset(config: SimConfig, rep: int):
    """One replicate of the benchmark LMM; returns (dataset, truth dict)."""
    beta, psi = resolve_truth(config)
    p, m, n = config.p, config.m, config.n
    seed = config.seed
    Sigma_X, _ = _draw_sigma_x(p, stream(seed, "rep", rep, "sigma-x"))
    sd_gamma = np.sqrt(psi)
    sd_eps = np.sqrt(config.sigma_e2_star)
    blocks = []
    for i in range(n):
        S_i, _ = _perturb_sigma_x(Sigma_X, stream(seed, "rep", rep, "subject", i, "sigma-x"))
        L = np.linalg.cholesky(S_i)
        X = stream(seed, "rep", rep, "subject", i, "x").standard_normal((m, p)) @ L.T
        gamma = stream(seed, "rep", rep, "subject", i, "gamma").standard_normal(p) * sd_gamma
        eps = stream(seed, "rep", rep, "subject", i, "eps").standard_normal(m) * sd_eps
        y = X @ (beta + gamma) + eps
        blocks.append(SubjectBlock(subject_id=f"s{i:04d}", y=y, X=X, column_map=np.arange(p)))
    truth = {"beta": beta, "psi": psi, "sigma_e2": config.sigma_e2_star}
    return LmmDataset(tuple(blocks)), truth


def gen_toy_blocks(config: SimConfig, rep: int):
    """One replicate of the 7-node toy network; returns (Y blocks, truth)."""
    seed = config.seed
    psi = TOY_RE_SD**2
    blocks = []
    for i in range(TOY_N):
        covariates = stream(seed, "rep", rep, "subject", i, "x").standard_normal((TOY_M, 6))
        gamma = stream(seed, "rep", rep, "subject", i, "gamma").standard_normal(6) * TOY_RE_SD
        eps = stream(seed, "rep", rep, "subject", i, "eps").standard_normal(TOY_M)
        node1 = covariates @ (TOY_BETA + gamma) + eps
        blocks.append(np.column_stack([node1, covariates]))
    truth = {"beta": TOY_BETA.copy(), "psi": psi, "sigma_e2": 1.0}
    return blocks, truth


def _spectral_radius(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def gen_mevar_truth(config: SimConfig, max_tries: int = 500):
    """Fixed VAR truth for a configuration: (Phi, sigma_gamma2, sigma_eps2).

    Phi is redrawn until its spectral radius leaves room for the random
    effects; the heterogeneity mask is redrawn until every probed row
    contains a null coordinate with and without heterogeneity, so type-I
    probes are well defined.
    """
    p = config.p
    rng = stream(config.seed, "mevar-truth")
    for _ in range(max_tries):
        Phi = np.zeros((p, p))
        np.fill_diagonal(Phi, rng.uniform(0.2, 0.8, p))
        mask = rng.random((p, p)) < 0.2
        np.fill_diagonal(mask, False)
        Phi[mask] = rng.normal(0.0, MEVAR_PHI_OFFDIAG_SD, int(mask.sum()))
        if _spectral_radius(Phi) <= 1.0 - MEVAR_STATIONARITY_DELTA - 0.15:
            break
    else:
        raise NumericalError("could not draw a stable Phi")
    lo, hi = MEVAR_RE_RANGE
    for _ in range(max_tries):
        sg2 = np.where(rng.random((p, p)) < MEVAR_RE_DENSITY,
                       rng.uniform(lo, hi, (p, p)), 0.0)
        ok = True
        for r in config.rows:
            null = Phi[r] == 0.0
            if not ((null & (sg2[r] > 0)).any() and (null & (sg2[r] == 0)).any()):
                ok = False
                break
        if ok:
            return Phi, sg2, MEVAR_SIGMA_EPS2
    raise NumericalError("could not draw a heterogeneity pattern with null probes")


def gen_mevar_series(config: SimConfig, truth, rep: int):
    """Per-subject stationary series from the mixed-effect VAR(1)."""
    Phi, sg2, se2 = truth
    p, T, n = config.p, config.T, config.n
    sd_g = np.sqrt(sg2)
    sd_e = float(np.sqrt(se2))
    bound = 1.0 - MEVAR_STATIONARITY_DELTA
    series = []
    for i in range(n):
        g_rng = stream(config.seed, "rep", rep, "subject", i, "gamma")
        for _ in range(PD_MAX_TRIES):
            A = Phi + g_rng.standard_normal((p, p)) * sd_g
            if _spectral_radius(A) <= bound:
                break
        else:
            raise NumericalError("subject coefficient matrix never stationary")
        e_rng = stream(config.seed, "rep", rep, "subject", i, "eps")
        y = np.zeros(p)
        out = np.empty((T, p))
        for t in range(config.burn_in + T):
            y = A @ y + e_rng.standard_normal(p) * sd_e
            if t >= config.burn_in:
                out[t - config.burn_in] = y
        series.append(out)
    return series


def mevar_probe_coords(config: SimConfig, truth, row: int) -> tuple[int, ...]:
    """Default probe set for one VAR row: the diagonal coefficient, one null
    with heterogeneity, one null without."""
    Phi, sg2, _ = truth
    null = Phi[row] == 0.0
    het_null = np.nonzero(null & (sg2[row] > 0))[0]
    fix_null = np.nonzero(null & (sg2[row] == 0))[0]
    coords = [row]
    if len(het_null):
        coords.append(int(het_null[0]))
    if len(fix_null):
        coords.append(int(fix_null[0]))
    return tuple(coords)


# ---------------------------------------------------------------------------
# Monte Carlo driver
# ---------------------------------------------------------------------------

def mcc(selected, truth_nonzero) -> float:
    """Matthews correlation of a binary selection; 0 when undefined."""
    sel = np.asarray(selected, dtype=bool)
    tru = np.asarray(truth_nonzero, dtype=bool)
    if sel.shape != tru.shape:
        raise DataError("selection and truth must have equal length")
    tp = int(np.sum(sel & tru))
    tn = int(np.sum(~sel & ~tru))
    fp = int(np.sum(sel & ~tru))
    fn = int(np.sum(~sel & tru))
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        return 0.0
    return float((tp * tn - fp * fn) / np.sqrt(den))


def _infer_coords(config: SimConfig, truth) -> tuple[int, ...]:
    if config.coords is not None:
        return tuple(int(c) for c in config.coords)
    if config.model == "toy_table1":
        return tuple(range(6))
    if config.model == "mevar_appendixE":
        return mevar_probe_coords(config, truth, config.rows[0])
    return tuple(c for c in HEADLINE_COORDS if c < config.p)


def _sub_seed(config: SimConfig, rep: int, *path) -> int:
    return int(stream(config.seed, "rep", rep, *path).integers(2**31 - 1))


def _run_lmm_method(dataset, coords, truth, method, config, rep):
    out = {"coords": {}, "chosen_a": None, "beta_err2": None}
    fit, report, _ = fit_cv(dataset, a=method.a, a_grid=config.a_grid,
                            n_lambdas=config.n_lambdas, K=config.K,
                            seed=_sub_seed(config, rep, "cv", method.name))
    out["chosen_a"] = fit.a
    out["beta_err2"] = float(np.sum((fit.beta - truth["beta"]) ** 2))
    for coord in coords:
        try:
            proj = fit_projection(dataset, coord, a=fit.a, K=config.K,
                                  seed=_sub_seed(config, rep, "kappa", method.name, coord),
                                  n_lambdas=config.n_lambdas)
            rec = debias(dataset, coord, fit, proj, alpha=config.alpha,
                         target=method.target, variance=method.variance)
            bt = truth["beta"][coord]
            out["coords"][coord] = {
                "est": rec.beta_db, "se": rec.se, "p": rec.p_value,
                "rejected": bool(rec.p_value <= config.alpha),
                "covered": bool(rec.ci_low <= bt <= rec.ci_high),
            }
        except (NumericalError, DataError) as exc:
            out["coords"][coord] = {"error": f"{type(exc).__name__}: {exc}"}
    return out


def run_replicate(config: SimConfig, rep: int) -> dict:
    """Generate, fit, and score one replicate (pure function of (config, rep))."""
    if config.model in ("lmm_section5", "custom"):
        dataset, truth = gen_lmm_dataset(config, rep)
    elif config.model == "toy_table1":
        blocks, truth = gen_toy_blocks(config, rep)
        dataset = make_neighborhood_dataset(blocks, 0, center=True)
    elif config.model == "mevar_appendixE":
        truth_mats = gen_mevar_truth(config)
        series = gen_mevar_series(config, truth_mats, rep)
        row = config.rows[0]
        from .mevar import build_row_problem
        dataset = build_row_problem(series, row)
        truth = {"beta": truth_mats[0][row], "psi": truth_mats[1][row],
                 "sigma_e2": truth_mats[2], "_mats": truth_mats}
    else:  # pragma: no cover - guarded by SimConfig
        raise DataError(f"unknown model {config.model!r}")

    coords = _infer_coords(config, truth)
    result = {"rep": rep, "methods": {}, "varcomp": None}
    for method in config.methods:
        try:
            result["methods"][method.name] = _run_lmm_method(
                dataset, coords, truth, method, config, rep)
        except (NumericalError, DataError) as exc:
            result["methods"][method.name] = {"error": f"{type(exc).__name__}: {exc}"}

    if config.varcomp:
        try:
            vc = run_varcomp_pipeline(dataset, seed=_sub_seed(config, rep, "varcomp"),
                                      a="cv", a_grid=config.a_grid, K=config.K)
            psi_true = truth["psi"]
            result["varcomp"] = {
                "psi_err2": float(np.sum((vc.psi_hat - psi_true) ** 2)),
                "sigma_e2_hat": vc.sigma_e2_hat,
                "sigma_e2_err2": float((vc.sigma_e2_hat - truth["sigma_e2"]) ** 2),
                "mcc": mcc(vc.psi_hat != 0.0, psi_true != 0.0),
                "n_selected": len(vc.selected),
            }
        except (NumericalError, DataError) as exc:
            result["varcomp"] = {"error": f"{type(exc).__name__}: {exc}"}
    return result


@dataclass
class SimReport:
    """Aggregated Monte Carlo metrics plus the replicate-level audit log."""

    config: SimConfig
    coord_rows: list = field(default_factory=list)
    varcomp_rows: list = field(default_factory=list)
    raw_rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def long_rows(self):
        """Plot-ready long format: (method, metric, coordinate, value, ...)."""
        ctx = {"model": self.config.model, "n": self.config.n, "m": self.config.m,
               "p": self.config.p, "reps": self.config.reps}
        rows = []
        for r in self.coord_rows:
            for metric in ("type_i", "power", "coverage", "rmse"):
                if r.get(metric) is not None:
                    rows.append({"method": r["method"], "metric": metric,
                                 "coordinate": r["coord"], "value": r[metric], **ctx})
        for r in self.varcomp_rows:
            for metric in ("psi_rmse", "psi_err_median", "sigma_e2_rmse", "mcc"):
                if r.get(metric) is not None:
                    rows.append({"method": r["method"], "metric": metric,
                                 "coordinate": "", "value": r[metric], **ctx})
        return rows

    def metric(self, method: str, coord: int, name: str):
        for r in self.coord_rows:
            if r["method"] == method and r["coord"] == coord:
                return r.get(name)
        raise KeyError(f"no metrics for method={method!r} coord={coord}")


def aggregate(config: SimConfig, results: list) -> SimReport:
    report = SimReport(config=config)
    reps = config.reps
    # replicate coordinate truth from rep 0's generator for labeling
    probe = results[0]
    method_names = [m.name for m in config.methods]
    if config.model in ("lmm_section5", "custom"):
        _, truth = gen_lmm_dataset(replace(config, n=1, m=2), 0)
    elif config.model == "toy_table1":
        truth = {"beta": TOY_BETA.copy(), "psi": TOY_RE_SD**2}
    else:
        mats = gen_mevar_truth(config)
        truth = {"beta": mats[0][config.rows[0]], "psi": mats[1][config.rows[0]]}

    coords = sorted({c for res in results for m in res["methods"].values()
                     if "coords" in m for c in m["coords"]})
    for name in method_names:
        for coord in coords:
            recs, fails = [], 0
            for res in results:
                mres = res["methods"].get(name, {})
                if "error" in mres:
                    fails += 1
                    report.failures.append(f"rep {res['rep']} {name}: {mres['error']}")
                    continue
                cres = mres["coords"].get(coord)
                if cres is None or "error" in cres:
                    fails += 1
                    if cres:
                        report.failures.append(
                            f"rep {res['rep']} {name} coord {coord}: {cres['error']}")
                    continue
                recs.append(cres)
                report.raw_rows.append({"rep": res["rep"], "method": name, "coord": coord,
                                        **cres})
            bt = float(truth["beta"][coord])
            pt = float(truth["psi"][coord])
            row = {"method": name, "coord": coord, "beta_true": bt, "psi_true": pt,
                   "n_ok": len(recs), "n_failed": fails,
                   "type_i": None, "power": None, "coverage": None, "rmse": None}
            if recs:
                rej = float(np.mean([r["rejected"] for r in recs]))
                row["type_i" if bt == 0 else "power"] = rej
                row["coverage"] = float(np.mean([r["covered"] for r in recs]))
                row["rmse"] = float(np.sqrt(np.mean([(r["est"] - bt) ** 2 for r in recs])))
            report.coord_rows.append(row)
        errs = [res["methods"][name].get("beta_err2") for res in results
                if name in res["methods"] and "error" not in res["methods"][name]]
        if errs:
            report.coord_rows.append({
                "method": name, "coord": -1, "beta_true": float("nan"),
                "psi_true": float("nan"), "n_ok": len(errs), "n_failed": reps - len(errs),
                "type_i": None, "power": None, "coverage": None,
                "rmse": float(np.sqrt(np.mean(errs))),
            })

    if config.varcomp:
        vcs = [res["varcomp"] for res in results if res["varcomp"] is not None]
        ok = [v for v in vcs if "error" not in v]
        for res in results:
            v = res["varcomp"]
            if v is not None and "error" in v:
                report.failures.append(f"rep {res['rep']} varcomp: {v['error']}")
        if ok:
            report.varcomp_rows.append({
                "method": "proposed",
                "psi_rmse": float(np.sqrt(np.mean([v["psi_err2"] for v in ok]))),
                "psi_err_median": float(np.median(np.sqrt([v["psi_err2"] for v in ok]))),
                "sigma_e2_rmse": float(np.sqrt(np.mean([v["sigma_e2_err2"] for v in ok]))),
                "mcc": float(np.mean([v["mcc"] for v in ok])),
                "n_ok": len(ok), "n_failed": reps - len(ok),
            })
    return report


def run_monte_carlo(config: SimConfig) -> SimReport:
    """Run all replicates (optionally in parallel) and aggregate.

    Results are independent of the thread count: replicates use keyed random
    streams and are aggregated in replicate order.
    """
    if config.model == "mevar_appendixE":
        gen_mevar_truth(config)  # fail fast if the truth draw is infeasible
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as ex:
            results = list(ex.map(partial(run_replicate, config), range(config.reps),
                                  chunksize=max(1, config.reps // (4 * config.threads))))
    else:
        results = [run_replicate(config, rep) for rep in range(config.reps)]
    return aggregate(config, results)
