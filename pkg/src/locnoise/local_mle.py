"""Local logistic likelihood, safeguarded Newton fits and LOO-CV bandwidth choice."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from . import _kernels
from ._accel import CONVERGED, SINGULAR, STATUS_NAMES
from .dataset import LabeledDataset
from .errors import InsufficientDataError, NonConvergenceError, ValidationError
from .kernel_basis import BasisSpec, KernelSpec


@dataclass(frozen=True)
class FitOptions:
    max_iterations: int = 50
    grad_tolerance: float = 1e-8
    ridge: float = 1e-10
    step_halving_max: int = 30
    # |intercept| cap; hitting it marks the fit as separated
    intercept_cap: float = 30.0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1", "max_iterations")
        if not self.grad_tolerance > 0:
            raise ValidationError("grad_tolerance must be > 0", "grad_tolerance")
        if self.ridge < 0:
            raise ValidationError("ridge must be >= 0", "ridge")
        if self.step_halving_max < 0:
            raise ValidationError("step_halving_max must be >= 0", "step_halving_max")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "FitOptions":
        return cls(**(d or {}))

    def kernel_args(self):
        return (
            int(self.max_iterations),
            float(self.grad_tolerance),
            float(self.ridge),
            int(self.step_halving_max),
            float(self.intercept_cap),
        )


DEFAULT_OPTIONS = FitOptions()


def logistic(v):
    if v >= 0:
        return 1.0 / (1.0 + math.exp(-v))
    e = math.exp(v)
    return e / (1.0 + e)


def pointwise_loglik(y: float, xi: float) -> float:
    """``y*xi - log(1 + exp(xi))`` without overflow."""
    return y * xi - (max(xi, 0.0) + math.log1p(math.exp(-abs(xi))))


@dataclass(frozen=True, eq=False)
class LocalFit:
    x0: np.ndarray
    beta_hat: np.ndarray
    kernel: KernelSpec
    basis: BasisSpec
    converged: bool
    iterations: int
    final_grad_norm: float
    eta_hat: float
    status: str = "converged"
    diagnostics: dict = field(default_factory=dict)


def _as_point(x0, d) -> np.ndarray:
    x0 = np.ascontiguousarray(x0, dtype=np.float64).reshape(-1)
    if x0.shape[0] != d:
        raise ValidationError(f"evaluation point has dimension {x0.shape[0]}, data has {d}", "x0")
    return x0


def local_loglik(beta, x0, ds: LabeledDataset, k: KernelSpec, b: BasisSpec) -> float:
    """Kernel-weighted Bernoulli log-likelihood of ``beta`` around ``x0``."""
    x0 = _as_point(x0, ds.d)
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    A = _kernels.design_matrix(ds.instances, x0, b.order)
    if beta.shape[0] != A.shape[1]:
        raise ValidationError(f"beta has length {beta.shape[0]}, basis has {A.shape[1]}", "beta")
    w = _kernels.gaussian_weights(ds.instances, x0, k.h)
    return float(_kernels.loglik(A, ds.y, w, beta))


def local_score(beta, x0, ds, k, b):
    """Analytic gradient and Hessian of :func:`local_loglik`."""
    x0 = _as_point(x0, ds.d)
    A = _kernels.design_matrix(ds.instances, x0, b.order)
    w = _kernels.gaussian_weights(ds.instances, x0, k.h)
    xi = A @ np.asarray(beta, dtype=np.float64)
    p = 1.0 / (1.0 + np.exp(-xi))
    g = A.T @ (w * (ds.y - p))
    H = -(A * (w * p * (1 - p))[:, None]).T @ A
    return g, H


def fit_local(
    x0,
    ds: LabeledDataset,
    k: KernelSpec,
    b: BasisSpec | None = None,
    opts: FitOptions = DEFAULT_OPTIONS,
    weights: np.ndarray | None = None,
) -> LocalFit:
    """Maximise the local log-likelihood at ``x0`` by safeguarded Newton-Raphson.

    Parameters
    ----------
    x0 : array-like, shape (d,)
        Evaluation point; the basis is recentred on it.
    ds : LabeledDataset
    k : KernelSpec
    b : BasisSpec, optional
        Defaults to local linear.
    opts : FitOptions
    weights : ndarray, optional
        Override the kernel weights (used for held-out fits).

    Returns
    -------
    LocalFit
        ``converged`` is False when the intercept hits the separation cap,
        the step-halving stalls, or the iteration budget runs out.

    Raises
    ------
    InsufficientDataError
        Fewer points than basis functions.
    NonConvergenceError
        The negative Hessian is numerically singular even after ridging.
    """
    if b is None:
        b = BasisSpec(1, ds.d)
    x0 = _as_point(x0, ds.d)
    if ds.n < b.length:
        raise InsufficientDataError(f"need at least {b.length} points for order {b.order}, got {ds.n}")
    A = _kernels.design_matrix(ds.instances, x0, b.order)
    w = _kernels.gaussian_weights(ds.instances, x0, k.h) if weights is None else np.ascontiguousarray(weights, dtype=np.float64)
    beta, status, iters, gnorm = _kernels.newton_logistic(A, ds.y, w, *opts.kernel_args())
    diag = {
        "status": STATUS_NAMES[status],
        "iterations": int(iters),
        "grad_norm": float(gnorm),
        "x0": x0.tolist(),
        "h": k.h,
        "weight_sum": float(np.sum(w)),
    }
    if status == SINGULAR:
        raise NonConvergenceError(
            "negative Hessian is numerically singular (empty neighbourhood?)", diag
        )
    beta = np.asarray(beta, dtype=np.float64)
    beta.setflags(write=False)
    x0.setflags(write=False)
    return LocalFit(
        x0=x0,
        beta_hat=beta,
        kernel=k,
        basis=b,
        converged=status == CONVERGED,
        iterations=int(iters),
        final_grad_norm=float(gnorm),
        eta_hat=logistic(float(beta[0])),
        status=STATUS_NAMES[status],
        diagnostics=diag,
    )


def predict_eta(ds, x0, k, b=None, opts=DEFAULT_OPTIONS) -> float:
    return fit_local(x0, ds, k, b, opts).eta_hat


# ---------------------------------------------------------------------------
# bandwidth selection


@dataclass(frozen=True)
class LoocvResult:
    h: float
    score: float
    n_used: int
    n_failed: int


def subsample_indices(n: int, subsample: int, seed) -> np.ndarray:
    if subsample < 1:
        raise ValidationError("LOO-CV subsample must be >= 1", "subsample")
    if subsample > n:
        raise ValidationError(f"subsample {subsample} exceeds n={n}", "subsample")
    if subsample == n:
        return np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=subsample, replace=False)).astype(np.int64)


def loocv_details(ds, k, b=None, subsample=None, seed=0, opts=DEFAULT_OPTIONS, max_fail_frac=0.10) -> LoocvResult:
    """Held-out log-likelihood over a seeded subsample, with failure counts."""
    if b is None:
        b = BasisSpec(1, ds.d)
    if subsample is None:
        subsample = min(ds.n, 100)
    idx = subsample_indices(ds.n, subsample, seed)
    if ds.n - 1 < b.length:
        raise InsufficientDataError(f"need at least {b.length + 1} points for LOO-CV")
    xi, status = _kernels.loo_fits(ds.instances, ds.y, idx, k.h, b.order, *opts.kernel_args())
    ok = status == CONVERGED
    n_failed = int(np.sum(~ok))
    if n_failed > max_fail_frac * len(idx):
        raise NonConvergenceError(
            f"{n_failed}/{len(idx)} held-out fits failed at h={k.h:g}",
            {"h": k.h, "n_failed": n_failed, "n_subsample": len(idx)},
        )
    y = ds.y[idx][ok]
    x = xi[ok]
    score = float(np.sum(y * x - (np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x))))))
    return LoocvResult(k.h, score, int(np.sum(ok)), n_failed)


def loocv_score(ds, k, b=None, subsample=None, seed=0, opts=DEFAULT_OPTIONS) -> float:
    """Sum of held-out log-likelihoods ``l(y_i, xi_(-i)(x_i))``; higher is better."""
    return loocv_details(ds, k, b, subsample, seed, opts).score


def default_bandwidth_grid(ds: LabeledDataset, num: int = 10) -> np.ndarray:
    """``num`` log-spaced values from 0.1*s to 2*s, s the mean per-dimension std."""
    s = float(np.mean(np.std(ds.instances, axis=0)))
    if not s > 0:
        s = 1.0
    return np.geomspace(0.1 * s, 2.0 * s, num)


@dataclass(frozen=True)
class BandwidthSelection:
    kernel: KernelSpec
    results: tuple
    errors: dict

    def to_dict(self) -> dict:
        return {
            "h": self.kernel.h,
            "scores": [asdict(r) for r in self.results],
            "errors": {str(h): msg for h, msg in self.errors.items()},
        }


def select_bandwidth_details(ds, grid=None, b=None, subsample=None, seed=0, opts=DEFAULT_OPTIONS) -> BandwidthSelection:
    if grid is None:
        grid = default_bandwidth_grid(ds)
    grid = [float(h) for h in grid]
    if not grid or any(not h > 0 for h in grid):
        raise ValidationError("bandwidth grid must be non-empty and positive", "grid")
    results = []
    errors = {}
    for h in grid:
        try:
            results.append(loocv_details(ds, KernelSpec(h), b, subsample, seed, opts))
        except (NonConvergenceError, InsufficientDataError) as exc:
            errors[h] = str(exc)
    if not results:
        raise NonConvergenceError("every bandwidth in the grid failed", {"per_h": {str(h): m for h, m in errors.items()}})
    best = max(results, key=lambda r: (r.score, r.h))
    return BandwidthSelection(KernelSpec(best.h), tuple(results), errors)


def select_bandwidth(ds, grid=None, b=None, subsample=None, seed=0, opts=DEFAULT_OPTIONS) -> KernelSpec:
    """Grid bandwidth maximising the subsampled LOO-CV score (ties go to larger h)."""
    return select_bandwidth_details(ds, grid, b, subsample, seed, opts).kernel
