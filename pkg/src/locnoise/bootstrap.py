"""Parametric and nonparametric bootstrap estimates of bias and standard error."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from ._accel import seed_sequence
from .dataset import LabeledDataset
from .errors import LocNoiseError, ValidationError

DEFAULT_B = 500
MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True, eq=False)
class BootstrapReport:
    estimate_0: float
    replicates: np.ndarray
    bias_bs: float
    se_bs: float
    B: int
    failures: int

    @property
    def reliable(self) -> bool:
        return self.failures / self.B <= MAX_FAILURE_RATE

    def to_dict(self) -> dict:
        d = asdict(self)
        d["replicates"] = self.replicates.tolist()
        d["reliable"] = self.reliable
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# errors a replicate may raise that count as a failed replicate
_REPLICATE_ERRORS = (LocNoiseError, ArithmeticError, np.linalg.LinAlgError, ValueError)


def _run(estimate_0, make_sample, estimator, B, seed) -> BootstrapReport:
    if B < 2:
        raise ValidationError(f"B must be >= 2, got {B}", "B")
    values = np.full(B, np.nan)
    for b, child in enumerate(seed_sequence(seed).spawn(B)):
        rng = np.random.default_rng(child)
        try:
            v = float(estimator(make_sample(rng)))
        except _REPLICATE_ERRORS:
            continue
        if math.isfinite(v):
            values[b] = v
    ok = values[np.isfinite(values)]
    if ok.size == 0:
        raise LocNoiseError(f"all {B} bootstrap replicates failed")
    se = float(np.std(ok, ddof=1)) if ok.size > 1 else float("nan")
    ok.setflags(write=False)
    return BootstrapReport(
        estimate_0=float(estimate_0),
        replicates=ok,
        bias_bs=float(np.mean(ok) - estimate_0),
        se_bs=se,
        B=B,
        failures=int(B - ok.size),
    )


def bootstrap_nonparametric(
    ds: LabeledDataset, estimator: Callable[[LabeledDataset], float], B: int = DEFAULT_B, seed=None
) -> BootstrapReport:
    """Resample ``n`` rows with replacement ``B`` times and re-apply ``estimator``.

    Replicates that raise or return a non-finite value are dropped and
    counted in ``failures``.
    """
    estimate_0 = float(estimator(ds))

    def sample(rng):
        return ds.subset(rng.integers(0, ds.n, size=ds.n))

    return _run(estimate_0, sample, estimator, B, seed)


def bootstrap_parametric(
    ds: LabeledDataset,
    model_eta: Callable[[np.ndarray], float],
    estimator: Callable[[LabeledDataset], float],
    B: int = DEFAULT_B,
    seed=None,
) -> BootstrapReport:
    """Keep the instances, redraw labels ``y_j ~ Bernoulli(model_eta(x_j))``."""
    eta = np.array([float(model_eta(x)) for x in ds.instances])
    if np.any(~np.isfinite(eta)) or np.any((eta < 0) | (eta > 1)):
        raise ValidationError("model_eta must return probabilities on every instance", "model_eta")
    estimate_0 = float(estimator(ds))

    def sample(rng):
        return ds.with_labels((rng.random(ds.n) < eta).astype(np.int64))

    return _run(estimate_0, sample, estimator, B, seed)
