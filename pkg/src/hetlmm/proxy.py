"""Low-rank proxy covariance a*Z Z' + I and its inverse/inverse-square-root.

All operations run through the spectral factorization of the Gram Z Z'
(rank r <= min(m, q)), so applying the inverse or inverse square root costs
O(m * r * k) instead of a dense m x m solve:

    (a Z Z' + I)^{-1}    = I - V diag(a*lam / (a*lam + 1)) V'
    (a Z Z' + I)^{-1/2}  = I - V diag(1 - 1/sqrt(a*lam + 1)) V'
    tr((a Z Z' + I)^{-1}) = (m - r) + sum_l 1 / (a*lam_l + 1)

with (lam, V) the nonzero eigenpairs of Z Z'. The same factorization serves
the projection proxy, built from Z with one designated column dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProxyFactor",
    "factor_proxy",
    "apply_inv",
    "apply_inv_sqrt",
    "trace_inv",
    "quad_form_theta",
]

# eigenvalues below this (relative) level are treated as exact rank deficiency
EIG_TRUNCATE_REL = 1e-12


@dataclass(frozen=True)
class ProxyFactor:
    """Spectral factorization of a*Z Z' + I_m.

    eigvals holds the nonzero eigenvalues of Z Z' (descending); eigvecs the
    matching orthonormal m x r basis. dropped_col records which Z column was
    removed before factorizing (None for the full proxy).
    """

    a: float
    eigvals: np.ndarray
    eigvecs: np.ndarray
    m: int
    dropped_col: int | None = None

    @property
    def rank(self) -> int:
        return len(self.eigvals)

    def dense(self) -> np.ndarray:
        """Reconstruct the dense proxy matrix (testing/small-m use only)."""
        V, lam = self.eigvecs, self.eigvals
        return np.eye(self.m) + (V * (self.a * lam)) @ V.T


def factor_proxy(Z: np.ndarray, a: float, dropped_col: int | None = None) -> ProxyFactor:
    """Factor a*Z Z' + I, optionally with one column of Z removed.

    ``a`` may be 0, in which case the factor represents the identity proxy
    (all apply_* operations become no-ops and the trace is m).
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise ValueError("Z must be a matrix")
    if not np.isfinite(Z).all():
        raise ValueError("non-finite entries in Z")
    if a < 0:
        raise ValueError(f"decorrelation constant must be >= 0, got {a}")
    m, q = Z.shape
    if dropped_col is not None:
        if not 0 <= dropped_col < q:
            raise ValueError(f"dropped_col {dropped_col} out of range for q={q}")
        Z = np.delete(Z, dropped_col, axis=1)
        q -= 1
    if a == 0.0 or q == 0:
        return ProxyFactor(a=float(a), eigvals=np.empty(0), eigvecs=np.empty((m, 0)),
                           m=m, dropped_col=dropped_col)
    if m <= q:
        lam, V = np.linalg.eigh(Z @ Z.T)
        lam, V = lam[::-1], V[:, ::-1]
    else:
        # thin SVD route: eigenpairs of Z Z' from left singular vectors
        V, s, _ = np.linalg.svd(Z, full_matrices=False)
        lam = s**2
    cutoff = EIG_TRUNCATE_REL * max(lam[0] if len(lam) else 0.0, 1.0)
    keep = lam > cutoff
    return ProxyFactor(a=float(a), eigvals=np.ascontiguousarray(lam[keep]),
                       eigvecs=np.ascontiguousarray(V[:, keep]), m=m, dropped_col=dropped_col)


def apply_inv(f: ProxyFactor, v: np.ndarray) -> np.ndarray:
    """Apply (a Z Z' + I)^{-1} to a vector or to the columns of a matrix."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] != f.m:
        raise ValueError(f"dimension mismatch: factor has m={f.m}, input has {v.shape[0]} rows")
    if f.rank == 0:
        return v.copy()
    shrink = f.a * f.eigvals / (f.a * f.eigvals + 1.0)
    proj = f.eigvecs.T @ v
    if v.ndim == 1:
        return v - f.eigvecs @ (shrink * proj)
    return v - f.eigvecs @ (shrink[:, None] * proj)


def apply_inv_sqrt(f: ProxyFactor, M: np.ndarray) -> np.ndarray:
    """Apply (a Z Z' + I)^{-1/2} to a vector or to the columns of a matrix."""
    M = np.asarray(M, dtype=float)
    if M.shape[0] != f.m:
        raise ValueError(f"dimension mismatch: factor has m={f.m}, input has {M.shape[0]} rows")
    if f.rank == 0:
        return M.copy()
    shrink = 1.0 - 1.0 / np.sqrt(f.a * f.eigvals + 1.0)
    proj = f.eigvecs.T @ M
    if M.ndim == 1:
        return M - f.eigvecs @ (shrink * proj)
    return M - f.eigvecs @ (shrink[:, None] * proj)


def trace_inv(f: ProxyFactor) -> float:
    """tr((a Z Z' + I)^{-1}) in closed form; lies in (0, m]."""
    return float((f.m - f.rank) + np.sum(1.0 / (f.a * f.eigvals + 1.0)))


def quad_form_theta(f_b: ProxyFactor, Z_full: np.ndarray, psi: np.ndarray,
                    sigma_e2: float, w: np.ndarray) -> float:
    """Quadratic form w' S^{-1/2} (Z diag(psi) Z' + sigma_e2 I) S^{-1/2} w.

    S is the (possibly column-dropped) proxy held by ``f_b`` while Z_full is
    the complete random-effect design; used to evaluate the oracle variance
    with known variance components.
    """
    Z_full = np.asarray(Z_full, dtype=float)
    psi = np.asarray(psi, dtype=float)
    w = np.asarray(w, dtype=float)
    if Z_full.shape[0] != f_b.m or w.shape[0] != f_b.m:
        raise ValueError("dimension mismatch between factor, Z_full, and w")
    if Z_full.shape[1] != len(psi):
        raise ValueError(f"psi has length {len(psi)}, Z has {Z_full.shape[1]} columns")
    if np.any(psi < 0) or sigma_e2 < 0:
        raise ValueError("variance components must be nonnegative here")
    u = apply_inv_sqrt(f_b, w)
    t = Z_full.T @ u
    return float(psi @ t**2 + sigma_e2 * (u @ u))
