"""Sandwich variance of local fits, delta-method prediction variance and
cross-covariance between fits at two evaluation points."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataset import LabeledDataset
from .errors import NonConvergenceError, SingularMatrixError
from .local_mle import LocalFit

# bread matrices worse than this are treated as singular
MAX_CONDITION = 1e12

NULL_DELTA_FACTOR = 1.0 / 16.0


@dataclass(frozen=True, eq=False)
class VarianceReport:
    coef_cov: np.ndarray
    v_x: float
    eta_var: float
    bread: np.ndarray
    meat: np.ndarray


@dataclass(frozen=True, eq=False)
class CovarianceReport:
    coef_cross: np.ndarray
    eta_cov: float


@dataclass(frozen=True, eq=False)
class _FitState:
    """Per-fit quantities reused across variance and covariance calls."""

    A: np.ndarray
    w: np.ndarray
    beta: np.ndarray
    bread_inv: np.ndarray
    bread: np.ndarray
    meat: np.ndarray


def _check(fit: LocalFit):
    if not fit.converged:
        raise NonConvergenceError(
            f"fit at {fit.x0.tolist()} did not converge ({fit.status})", fit.diagnostics
        )


def _invert_bread(B: np.ndarray) -> np.ndarray:
    cond = float(np.linalg.cond(B))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularMatrixError(f"bread matrix is singular (condition number {cond:.3g})", cond)
    return np.linalg.inv(B)


def fit_state(fit: LocalFit, ds: LabeledDataset) -> _FitState:
    _check(fit)
    x0 = np.ascontiguousarray(fit.x0, dtype=np.float64)
    A = _kernels.design_matrix(ds.instances, x0, fit.basis.order)
    w = _kernels.gaussian_weights(ds.instances, x0, fit.kernel.h)
    beta = np.ascontiguousarray(fit.beta_hat, dtype=np.float64)
    B, C = _kernels.sandwich_parts(A, ds.y, w, beta)
    return _FitState(A, w, beta, _invert_bread(B), B, C)


def _effective_n(w):
    return float(np.sum(w) ** 2 / np.sum(w * w))


def sandwich_variance(fit: LocalFit, ds: LabeledDataset, dof_correction: bool = False) -> VarianceReport:
    """Sandwich covariance ``B^-1 C B^-1`` of the local coefficients.

    ``eta_var`` applies the delta method at the fitted posterior,
    ``eta_hat**2 * (1 - eta_hat)**2 * v_x``, which is ``v_x / 16`` when
    ``eta_hat`` is one half.

    With ``dof_correction`` the covariance is inflated by
    ``n_eff / (n_eff - m)`` where ``n_eff`` is the Kish effective sample size
    of the kernel weights and ``m`` the basis length.
    """
    _check(fit)
    x0 = np.ascontiguousarray(fit.x0, dtype=np.float64)
    A = _kernels.design_matrix(ds.instances, x0, fit.basis.order)
    w = _kernels.gaussian_weights(ds.instances, x0, fit.kernel.h)
    B, C = _kernels.sandwich_parts(A, ds.y, w, np.ascontiguousarray(fit.beta_hat, dtype=np.float64))
    Binv = _invert_bread(B)
    cov = Binv @ C @ Binv
    if dof_correction:
        n_eff = _effective_n(w)
        m = A.shape[1]
        if n_eff <= m:
            raise NonConvergenceError("effective sample size too small for dof correction", {"n_eff": n_eff})
        cov = cov * (n_eff / (n_eff - m))
    v_x = float(cov[0, 0])
    eta = fit.eta_hat
    return VarianceReport(cov, v_x, eta * eta * (1 - eta) ** 2 * v_x, B, C)


def _cross(sk: _FitState, sj: _FitState, y) -> np.ndarray:
    M = _kernels.cross_meat(sk.A, sj.A, y, sk.w, sj.w, sk.beta, sj.beta)
    return sk.bread_inv @ M @ sj.bread_inv


def cross_covariance(fit_j: LocalFit, fit_k: LocalFit, ds: LabeledDataset) -> CovarianceReport:
    """Covariance between coefficient estimates at two evaluation points.

    Uses the cross-moment ``sum (y-p_k)(y-p_j) w_k w_j a_k a_j^T`` between
    the two breads; at ``j == k`` this is exactly the sandwich meat.
    ``eta_cov`` uses the null delta factor 1/16.
    """
    sk = fit_state(fit_k, ds)
    sj = fit_state(fit_j, ds)
    cross = _cross(sk, sj, ds.y)
    return CovarianceReport(cross, float(cross[0, 0]) * NULL_DELTA_FACTOR)


def coefficient_covariance_matrix(states, y) -> np.ndarray:
    """Intercept-level covariance matrix ``[v_i, cov_ij]`` across several fits."""
    k = len(states)
    out = np.empty((k, k))
    for i in range(k):
        s = states[i]
        out[i, i] = (s.bread_inv @ s.meat @ s.bread_inv)[0, 0]
        for j in range(i + 1, k):
            c = _cross(states[i], states[j], y)[0, 0]
            out[i, j] = c
            out[j, i] = c
    return out
