"""Tests of uniform against class-conditional label noise at anchor points.

Under uniform noise the noisy posterior at a strict anchor stays at one
half, so the mean fitted posterior over the anchors is compared with 0.5
through a z statistic.  The pooling and p-value code here is shared by the
nonparametric and parametric methods.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .anchors import AnchorSet
from .asymptotics import NULL_DELTA_FACTOR, VarianceReport, coefficient_covariance_matrix, fit_state
from .dataset import LabeledDataset
from .errors import AnchorFitError, LocNoiseError, PooledVarianceError, ValidationError
from .kernel_basis import BasisSpec, KernelSpec
from .local_mle import DEFAULT_OPTIONS, FitOptions, LocalFit, fit_local

MODES = ("exact", "approx")
CONVENTIONS = ("paper", "recomputed")


def two_sided_p(z: float) -> float:
    """``2 * (1 - Phi(|z|))`` computed as ``erfc(|z| / sqrt 2)``.

    ``math.erfc`` is accurate to a few ulps, far inside 1e-10 absolute, and
    avoids the cancellation of ``1 - Phi`` in the tails.
    """
    if not math.isfinite(z):
        raise ValidationError(f"z must be finite, got {z}", "z")
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


@dataclass
class TestReport:
    eta_bar: float
    var_bar: float
    z: float
    p_value: float
    k: int
    delta: float
    variance_terms: dict
    per_anchor: list
    method: str = "nonparametric"
    anchor_kind: str = "strict"
    mode: str = "exact"
    convention: str = "paper"
    metadata: dict = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def reject(self, threshold: float = 0.05) -> bool:
        return self.p_value <= threshold


# ---------------------------------------------------------------------------
# pooling


def _as_v(vrs) -> np.ndarray:
    return np.array([vr.v_x if isinstance(vr, VarianceReport) else float(vr) for vr in vrs], dtype=np.float64)


def eta_covariance(v, covs=None) -> np.ndarray:
    """Eta-level covariance matrix: ``v_i / 16`` on the diagonal, ``covs`` off it."""
    v = _as_v(v)
    k = v.shape[0]
    S = np.zeros((k, k)) if covs is None else np.array(covs, dtype=np.float64).reshape(k, k).copy()
    np.fill_diagonal(S, v * NULL_DELTA_FACTOR)
    return S


def _pool_terms(S: np.ndarray):
    k = S.shape[0]
    var_sum = float(np.trace(S))
    cov_sum = 2.0 * float(np.sum(np.triu(S, 1)))
    return k, var_sum, cov_sum


def pool(S, delta: float = 0.0, mode: str = "exact", convention: str = "paper"):
    """Variance of the anchor mean from an eta-level covariance matrix.

    Returns ``(var_bar, terms)``.  With ``delta > 0`` and ``mode='exact'``
    the anchor-imprecision correction ``(1 - 16 delta^2 / 6) * V + delta^2/(c k)``
    is applied, with ``c = 6`` under the ``paper`` convention and ``c = 3``
    (the variance of Uniform[-delta, delta]) under ``recomputed``.
    """
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}", "mode")
    if convention not in CONVENTIONS:
        raise ValidationError(f"convention must be one of {CONVENTIONS}", "convention")
    if not 0.0 <= delta <= 0.5:
        raise ValidationError(f"delta={delta} outside [0, 0.5]", "delta")
    S = np.asarray(S, dtype=np.float64)
    k, var_sum, cov_sum = _pool_terms(S)
    strict = (var_sum + cov_sum) / (k * k)
    terms = {"var_sum": var_sum, "cov_sum": cov_sum, "relax_factor": 1.0, "relax_term": 0.0}
    if delta == 0.0 or mode == "approx":
        var_bar = strict
    else:
        factor = 1.0 - 16.0 * delta * delta / 6.0
        denom = 6.0 if convention == "paper" else 3.0
        relax = delta * delta / (denom * k)
        var_bar = factor * strict + relax
        terms["relax_factor"] = factor
        terms["relax_term"] = relax
    if not var_bar > 0:
        raise PooledVarianceError(
            f"pooled variance {var_bar:.3g} is not positive (covariance sum {cov_sum:.3g})", terms
        )
    return var_bar, terms


def pooled_variance_strict(vrs, covs=None, k: int | None = None) -> float:
    """``(sum v_i / 16 + 2 sum_{i<j} cov_ij) / k^2`` for strict anchors.

    ``vrs`` are intercept variances ``v_x`` (or VarianceReports); ``covs``
    is the k-by-k matrix of eta-level covariances (diagonal ignored).
    """
    S = eta_covariance(vrs, covs)
    if k is not None and k != S.shape[0]:
        raise ValidationError(f"k={k} does not match {S.shape[0]} variances", "k")
    return pool(S)[0]


def pooled_variance_relaxed(vrs, covs=None, k: int | None = None, delta: float = 0.0,
                            mode: str = "exact", convention: str = "paper") -> float:
    S = eta_covariance(vrs, covs)
    if k is not None and k != S.shape[0]:
        raise ValidationError(f"k={k} does not match {S.shape[0]} variances", "k")
    return pool(S, delta, mode, convention)[0]


def report_from_predictions(
    points, eta_hats, S, v_coef, delta=0.0, anchor_kind="strict", mode="exact",
    convention="paper", method="nonparametric", metadata=None,
) -> TestReport:
    """Pool per-anchor predictions and their eta-level covariance into a report."""
    eta_hats = np.asarray(eta_hats, dtype=np.float64)
    var_bar, terms = pool(S, delta, mode, convention)
    eta_bar = float(np.mean(eta_hats))
    z = (eta_bar - 0.5) / math.sqrt(var_bar)
    per_anchor = [
        {"x": list(map(float, x)), "eta_hat": float(e), "v_x": float(v)}
        for x, e, v in zip(np.asarray(points), eta_hats, np.asarray(v_coef))
    ]
    return TestReport(
        eta_bar=eta_bar,
        var_bar=float(var_bar),
        z=float(z),
        p_value=two_sided_p(z),
        k=len(eta_hats),
        delta=float(delta),
        variance_terms=terms,
        per_anchor=per_anchor,
        method=method,
        anchor_kind=anchor_kind,
        mode=mode,
        convention=convention,
        metadata=dict(metadata or {}),
    )


# ---------------------------------------------------------------------------
# tests


def test_single_strict(fit: LocalFit, vr: VarianceReport) -> TestReport:
    """One strict anchor: ``z = (eta_hat - 1/2) / sqrt(v_x / 16)``."""
    if not fit.converged:
        raise AnchorFitError(f"fit did not converge ({fit.status})", 0, fit.x0.tolist(), fit.diagnostics)
    if not vr.v_x > 0:
        raise PooledVarianceError(f"v_x={vr.v_x:.3g} is not positive")
    S = np.array([[vr.v_x * NULL_DELTA_FACTOR]])
    return report_from_predictions(
        [fit.x0], [fit.eta_hat], S, [vr.v_x],
        metadata={"h": fit.kernel.h, "order": fit.basis.order},
    )


test_single_strict.__test__ = False


def fit_anchors(ds: LabeledDataset, anchors: AnchorSet, k: KernelSpec, b: BasisSpec, opts: FitOptions):
    """Fit at every anchor, aborting on the first failure."""
    fits = []
    for i, x in enumerate(anchors.points):
        try:
            fit = fit_local(x, ds, k, b, opts)
        except LocNoiseError as exc:
            raise AnchorFitError(
                f"fit at anchor {i} {x.tolist()} failed: {exc}", i, x.tolist(),
                getattr(exc, "diagnostics", {}),
            ) from exc
        if not fit.converged:
            raise AnchorFitError(
                f"fit at anchor {i} {x.tolist()} did not converge ({fit.status})", i, x.tolist(),
                fit.diagnostics,
            )
        fits.append(fit)
    return fits


def test_multi(
    ds: LabeledDataset,
    anchors: AnchorSet,
    k: KernelSpec,
    b: BasisSpec | None = None,
    opts: FitOptions = DEFAULT_OPTIONS,
    mode: str = "exact",
    convention: str = "paper",
) -> TestReport:
    """Nonparametric test over a set of strict or relaxed anchors."""
    if b is None:
        b = BasisSpec(1, ds.d)
    if anchors.d != ds.d:
        raise ValidationError(f"anchors have dimension {anchors.d}, data has {ds.d}", "anchors")
    fits = fit_anchors(ds, anchors, k, b, opts)
    try:
        states = [fit_state(f, ds) for f in fits]
    except LocNoiseError as exc:
        raise AnchorFitError(f"variance estimate failed: {exc}", -1, None) from exc
    coef = coefficient_covariance_matrix(states, ds.y)
    S = coef * NULL_DELTA_FACTOR
    return report_from_predictions(
        anchors.points,
        [f.eta_hat for f in fits],
        S,
        np.diag(coef),
        anchors.delta,
        anchors.kind,
        mode,
        convention,
        "nonparametric",
        {"h": k.h, "order": b.order},
    )


test_multi.__test__ = False
