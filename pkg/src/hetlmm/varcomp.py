"""Variance-component estimation by penalized second moments.

The random-effect variances psi solve an l1-penalized quadratic program: the
Frobenius moment criterion

    sum_{i in S2} || r_i r_i' - diag(r_i)^2 - sum_l psi_l A_l^i ||_F^2
        + lambda ||psi||_1,     A_l^i = Z_l Z_l' - diag(Z_l)^2,

equals  psi' B psi - 2 delta' psi + const  with

    B_jk    = sum_i tr(A_j A_k) = sum_i [ (Z_j'Z_k)^2 - sum_t Z_tj^2 Z_tk^2 ]
    delta_k = sum_i tr(A_k (r r' - diag(r)^2)) = sum_i [ (Z_k'r)^2 - sum_t Z_tk^2 r_t^2 ],

so the q x q system is formed once in O(n m q^2) and solved by coordinate
descent. Estimation runs under a three-way subject split: S1 fits the fixed
effects, S2 fits psi from the S1 residuals, S3 estimates the noise variance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import LmmDataset, SubjectPartition, partition_subjects
from .errors import DataError
from .lasso import DEFAULT_A_GRID, fit_cv
from .rng import stream

__all__ = [
    "MomentSystem",
    "VarCompEstimate",
    "build_moment_system",
    "solve_psi",
    "cv_lambda_theta",
    "estimate_sigma_e2",
    "run_varcomp_pipeline",
]

DEFAULT_N_LAMBDAS_THETA = 30
LAMBDA_THETA_MIN_RATIO = 1e-4
PSI_TOL = 1e-10
PSI_MAX_ITERS = 10_000


@dataclass(frozen=True)
class MomentSystem:
    """Quadratic reduction of the moment criterion over a subject set."""

    B: np.ndarray
    delta: np.ndarray
    const: float
    per_subject: tuple[tuple[np.ndarray, np.ndarray, float], ...]  # (B_i, delta_i, const_i)

    @property
    def q(self) -> int:
        return len(self.delta)

    def objective(self, psi: np.ndarray, lam: float = 0.0) -> float:
        """Frobenius criterion value (plus penalty) at psi."""
        psi = np.asarray(psi, dtype=float)
        return float(psi @ self.B @ psi - 2.0 * self.delta @ psi + self.const
                     + lam * np.abs(psi).sum())

    def restrict(self, indices) -> "MomentSystem":
        parts = [self.per_subject[i] for i in indices]
        return MomentSystem(
            B=sum(p[0] for p in parts), delta=sum(p[1] for p in parts),
            const=sum(p[2] for p in parts), per_subject=tuple(parts),
        )


def _subject_moments(Z: np.ndarray, r: np.ndarray):
    C = Z.T @ Z
    W = Z**2
    B_i = C**2 - W.T @ W
    t = Z.T @ r
    delta_i = t**2 - W.T @ r**2
    r2 = float(r @ r)
    const_i = r2**2 - float(np.sum(r**4))
    return B_i, delta_i, const_i


def build_moment_system(dataset: LmmDataset, residuals) -> MomentSystem:
    """Assemble B and delta from Z blocks and residuals r_i = y_i - X_i beta_hat."""
    residuals = [np.asarray(r, dtype=float) for r in residuals]
    if len(residuals) != dataset.n:
        raise DataError("one residual vector per subject required")
    per_subject = []
    for b, r in zip(dataset.blocks, residuals):
        if r.shape != (b.m,):
            raise DataError(f"residual shape {r.shape} does not match subject rows {b.m}")
        per_subject.append(_subject_moments(b.Z, r))
    B = sum(p[0] for p in per_subject)
    delta = sum(p[1] for p in per_subject)
    const = sum(p[2] for p in per_subject)
    return MomentSystem(B=B, delta=delta, const=const, per_subject=tuple(per_subject))


def solve_psi(system: MomentSystem, lambda_theta: float,
              tol: float = PSI_TOL, max_iters: int = PSI_MAX_ITERS) -> np.ndarray:
    """Coordinate descent on psi'B psi - 2 delta'psi + lambda ||psi||_1.

    Starts from zero (so the criterion never exceeds its value at zero).
    Coordinates with a zero diagonal in B are unidentifiable and stay at 0.
    """
    if lambda_theta < 0:
        raise DataError("lambda_theta must be >= 0")
    B, delta = system.B, system.delta
    q = system.q
    diag = np.diag(B)
    dead = diag <= 0.0
    if dead.any():
        warnings.warn(
            f"{int(dead.sum())} variance component(s) unidentifiable (zero diagonal in B); "
            "frozen at 0", stacklevel=2)
    psi = np.zeros(q)
    half_lam = 0.5 * lambda_theta
    for _ in range(max_iters):
        delta_max = 0.0
        for k in range(q):
            if dead[k]:
                continue
            zk = delta[k] - B[k] @ psi + diag[k] * psi[k]
            if zk > half_lam:
                new = (zk - half_lam) / diag[k]
            elif zk < -half_lam:
                new = (zk + half_lam) / diag[k]
            else:
                new = 0.0
            d = abs(new - psi[k])
            if d > delta_max:
                delta_max = d
            psi[k] = new
        if delta_max < tol * max(1.0, float(np.max(np.abs(psi)))):
            break
    return psi


def _lambda_theta_path(system: MomentSystem, n_lambdas: int) -> np.ndarray:
    lmax = 2.0 * float(np.max(np.abs(system.delta)))
    if lmax <= 0:
        return np.full(n_lambdas, np.finfo(float).tiny)
    return np.geomspace(lmax, lmax * LAMBDA_THETA_MIN_RATIO, n_lambdas)


def cv_lambda_theta(system: MomentSystem, seed: int, K: int = 5,
                    n_lambdas: int = DEFAULT_N_LAMBDAS_THETA) -> float:
    """Pick lambda_theta by subject-fold CV on the Frobenius criterion."""
    n = len(system.per_subject)
    K = min(K, n)
    if K < 2:
        raise DataError(f"lambda_theta CV needs at least 2 subjects, got {n}")
    rng = stream(seed, "lambda-theta-cv", n, K)
    fold_of = rng.permutation(n) % K
    lambdas = _lambda_theta_path(system, n_lambdas)
    score = np.zeros(len(lambdas))
    for k in range(K):
        train = np.nonzero(fold_of != k)[0]
        test = np.nonzero(fold_of == k)[0]
        sys_tr = system.restrict(train)
        sys_te = system.restrict(test)
        for li, lam in enumerate(lambdas):
            psi = solve_psi(sys_tr, lam)
            score[li] += sys_te.objective(psi)
    best = score.min()
    candidates = [i for i in range(len(lambdas)) if score[i] <= best + 1e-12]
    return float(lambdas[min(candidates)])  # largest lambda among ties


def estimate_sigma_e2(dataset: LmmDataset, residuals, psi_hat) -> float:
    """Noise variance by the trace moment on the third split.

    (1 / sum_i m_i) * sum_i ( ||r_i||^2 - sum_l psi_l ||Z_l^i||^2 ); may come
    out negative, which is reported as is.
    """
    psi_hat = np.asarray(psi_hat, dtype=float)
    if len(psi_hat) != dataset.q:
        raise DataError(f"psi_hat has length {len(psi_hat)}, dataset has q={dataset.q}")
    residuals = [np.asarray(r, dtype=float) for r in residuals]
    if len(residuals) != dataset.n:
        raise DataError("one residual vector per subject required")
    total = 0.0
    rows = 0
    for b, r in zip(dataset.blocks, residuals):
        if r.shape != (b.m,):
            raise DataError(f"residual shape {r.shape} does not match subject rows {b.m}")
        col_norms = np.sum(b.Z**2, axis=0)
        total += float(r @ r) - float(psi_hat @ col_norms)
        rows += b.m
    return total / rows


@dataclass(frozen=True)
class VarCompEstimate:
    psi_hat: np.ndarray
    sigma_e2_hat: float
    sigma_e2_floored: float
    lambda_theta: float
    split: SubjectPartition
    selected: tuple[int, ...]
    beta_hat: np.ndarray
    chosen_a: float
    chosen_lambda: float


def run_varcomp_pipeline(dataset: LmmDataset, seed: int, a="cv",
                         a_grid=DEFAULT_A_GRID, lambda_theta="cv",
                         n_lambdas: int = 50, n_lambdas_theta: int = DEFAULT_N_LAMBDAS_THETA,
                         K: int = 5, nonnegative: bool = False) -> VarCompEstimate:
    """Three-way split pipeline: S1 -> beta_hat, S2 -> psi_hat, S3 -> sigma_e2.

    ``nonnegative=True`` clips negative psi entries to zero after the solve.
    """
    if dataset.n < 3:
        raise DataError(f"variance-component pipeline needs n >= 3 (n={dataset.n})")
    split = partition_subjects(dataset, "three_way_split", seed)
    parts = [split.members(k) for k in range(3)]
    ds1 = dataset.subset(parts[0])
    ds2 = dataset.subset(parts[1])
    ds3 = dataset.subset(parts[2])

    fit, report, _ = fit_cv(ds1, a=a, a_grid=a_grid, n_lambdas=n_lambdas, K=K,
                            seed=seed)
    beta = fit.beta

    resid2 = [b.y - b.X @ beta for b in ds2.blocks]
    system = build_moment_system(ds2, resid2)
    if lambda_theta == "cv":
        lam_theta = cv_lambda_theta(system, seed=seed, K=K, n_lambdas=n_lambdas_theta)
    else:
        lam_theta = float(lambda_theta)
    psi = solve_psi(system, lam_theta)
    if nonnegative:
        psi = np.maximum(psi, 0.0)

    resid3 = [b.y - b.X @ beta for b in ds3.blocks]
    sigma_e2 = estimate_sigma_e2(ds3, resid3, psi)

    return VarCompEstimate(
        psi_hat=psi, sigma_e2_hat=sigma_e2, sigma_e2_floored=max(sigma_e2, 0.0),
        lambda_theta=lam_theta, split=split,
        selected=tuple(int(j) for j in np.nonzero(psi)[0]),
        beta_hat=beta, chosen_a=report.chosen[0], chosen_lambda=report.chosen[1],
    )
