"""Global logistic regression baseline feeding the same pooled test."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._accel import CONVERGED, STATUS_NAMES
from .anchors import AnchorSet
from .dataset import LabeledDataset
from .errors import InsufficientDataError, NonConvergenceError, SingularMatrixError, ValidationError
from .hypothesis import TestReport, report_from_predictions
from .local_mle import DEFAULT_OPTIONS, FitOptions


@dataclass(frozen=True, eq=False)
class GlobalFit:
    beta_hat: np.ndarray
    coef_cov: np.ndarray
    converged: bool
    iterations: int

    def linear_predictor(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.beta_hat[0] + X @ self.beta_hat[1:]

    def predict(self, X) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.linear_predictor(X)))


def _with_intercept(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.hstack([np.ones((X.shape[0], 1)), X])


def fit_global_logistic(ds: LabeledDataset, opts: FitOptions = DEFAULT_OPTIONS) -> GlobalFit:
    """Newton-Raphson MLE of logistic regression with an intercept.

    ``coef_cov`` is the inverse observed information at the optimum.
    Separation or a singular information matrix raises NonConvergenceError.
    """
    if ds.n < ds.d + 1:
        raise InsufficientDataError(f"need at least {ds.d + 1} points, got {ds.n}")
    Z = _with_intercept(ds.instances)
    w = np.ones(ds.n)
    beta, status, iters, gnorm = _kernels.newton_logistic(Z, ds.y, w, *opts.kernel_args())
    if status != CONVERGED:
        raise NonConvergenceError(
            f"global logistic fit did not converge ({STATUS_NAMES[status]})",
            {"status": STATUS_NAMES[status], "iterations": int(iters), "grad_norm": float(gnorm)},
        )
    beta = np.asarray(beta, dtype=np.float64)
    p = 1.0 / (1.0 + np.exp(-(Z @ beta)))
    info = (Z * (p * (1 - p))[:, None]).T @ Z
    cond = float(np.linalg.cond(info))
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularMatrixError(f"observed information is singular (condition number {cond:.3g})", cond)
    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)
    return GlobalFit(beta, cov, True, int(iters))


def test_parametric(
    ds: LabeledDataset,
    anchors: AnchorSet,
    delta: float | None = None,
    opts: FitOptions = DEFAULT_OPTIONS,
    mode: str = "exact",
    convention: str = "paper",
    fit: GlobalFit | None = None,
) -> TestReport:
    """Parametric counterpart of :func:`locnoise.hypothesis.test_multi`.

    Per-anchor variances and covariances come from the delta method on the
    shared coefficient covariance, ``g'_j g'_k z_j^T Cov z_k`` with
    ``g' = eta (1 - eta)`` at the fitted posterior.
    """
    if anchors.d != ds.d:
        raise ValidationError(f"anchors have dimension {anchors.d}, data has {ds.d}", "anchors")
    if delta is None:
        delta = anchors.delta
    if fit is None:
        fit = fit_global_logistic(ds, opts)
    Z = _with_intercept(anchors.points)
    eta = 1.0 / (1.0 + np.exp(-(Z @ fit.beta_hat)))
    g = eta * (1.0 - eta)
    quad = Z @ fit.coef_cov @ Z.T
    S = g[:, None] * quad * g[None, :]
    return report_from_predictions(
        anchors.points,
        eta,
        S,
        np.diag(quad),
        delta,
        anchors.kind,
        mode,
        convention,
        "parametric",
        {"beta_hat": fit.beta_hat.tolist()},
    )


test_parametric.__test__ = False
