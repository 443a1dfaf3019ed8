"""Bayes posteriors of Gaussian mixtures and strict/relaxed anchor generation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from ._accel import seed_sequence
from .dataset import GaussianMixtureSpec, load_points_csv
from .errors import AnchorSearchError, ValidationError

STRICT_TOL = 1e-6
# log of the smallest positive normal double


@dataclass(frozen=True, eq=False)
class AnchorSet:
    """Evaluation points whose posterior is one half (strict) or within delta of it."""

    points: np.ndarray
    delta: float = 0.0
    kind: str = "strict"
    true_posteriors: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValidationError("anchor set needs at least one point", "points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.kind not in ("strict", "relaxed"):
            raise ValidationError(f"unknown anchor kind {self.kind!r}", "kind")
        delta = float(self.delta)
        object.__setattr__(self, "delta", delta)
        if not 0.0 <= delta <= 0.5:
            raise ValidationError(f"delta={delta} outside [0, 0.5]", "delta")
        if self.kind == "strict" and delta != 0.0:
            raise ValidationError("strict anchors require delta = 0", "delta")
        if self.true_posteriors is not None:
            eta = np.array(self.true_posteriors, dtype=np.float64).reshape(-1)
            if eta.shape[0] != pts.shape[0]:
                raise ValidationError("one posterior per anchor is required", "true_posteriors")
            tol = STRICT_TOL if self.kind == "strict" else delta + 1e-12
            if np.any(np.abs(eta - 0.5) > tol):
                raise ValidationError(f"anchor posteriors outside 0.5 +/- {tol:g}", "true_posteriors")
            eta.setflags(write=False)
            object.__setattr__(self, "true_posteriors", eta)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def head(self, k: int) -> "AnchorSet":
        """First ``k`` anchors, keeping kind and delta."""
        eta = None if self.true_posteriors is None else self.true_posteriors[:k]
        return AnchorSet(self.points[:k], self.delta, self.kind, eta)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "delta": self.delta,
            "points": self.points.tolist(),
            "true_posteriors": None if self.true_posteriors is None else self.true_posteriors.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "AnchorSet":
        return cls(d["points"], d.get("delta", 0.0), d.get("kind", "strict"), d.get("true_posteriors"))

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def from_json(cls, path) -> "AnchorSet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = [f"x{j + 1}" for j in range(self.d)]
            if self.true_posteriors is not None:
                header.append("eta")
            w.writerow(header)
            for i, row in enumerate(self.points):
                vals = [repr(float(v)) for v in row]
                if self.true_posteriors is not None:
                    vals.append(repr(float(self.true_posteriors[i])))
                w.writerow(vals)

    @classmethod
    def from_csv(cls, path, delta: float = 0.0, d: int | None = None) -> "AnchorSet":
        """Load user-supplied anchors; ``delta > 0`` marks them as relaxed."""
        pts, eta = load_points_csv(path, d)
        kind = "relaxed" if delta > 0 else "strict"
        return cls(pts, delta, kind, eta)


# ---------------------------------------------------------------------------
# Bayes posterior


def _class_log_density(spec: GaussianMixtureSpec, X: np.ndarray, c: int) -> np.ndarray:
    d = X.shape[1]
    terms = []
    for comp in spec.components[c]:
        diff = X - np.asarray(comp.center)
        sq = np.sum(diff * diff, axis=1)
        terms.append(
            math.log(comp.weight)
            - sq / (2 * comp.scale ** 2)
            - d * math.log(comp.scale)
            - 0.5 * d * math.log(2 * math.pi)
        )
    return logsumexp(np.stack(terms), axis=0)


def bayes_posteriors(spec: GaussianMixtureSpec, X) -> np.ndarray:
    """Vectorised :func:`bayes_posterior`; NaN where the log-density ratio is undefined."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    with np.errstate(divide="ignore"):
        l0 = _class_log_density(spec, X, 0) + np.log(spec.priors[0])
        l1 = _class_log_density(spec, X, 1) + np.log(spec.priors[1])
    with np.errstate(over="ignore", invalid="ignore"):
        diff = l1 - l0
        eta = np.where(diff >= 0, 1.0 / (1.0 + np.exp(-diff)), np.exp(diff) / (1.0 + np.exp(diff)))
    return np.where(np.isnan(diff), np.nan, eta)


def bayes_posterior(spec: GaussianMixtureSpec, x) -> float:
    """P(y=1 | x) under the mixture, computed in log space."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != spec.d:
        raise ValidationError(f"point has dimension {x.shape[1]}, spec has {spec.d}", "x")
    eta = float(bayes_posteriors(spec, x)[0])
    if math.isnan(eta):
        raise ValidationError(f"class log-densities are not finite at {x[0].tolist()}", "x")
    return eta


# ---------------------------------------------------------------------------
# anchor generation


def _box(box, d) -> np.ndarray:
    b = np.asarray(box, dtype=np.float64)
    if b.ndim == 1 and b.shape[0] == 2:
        b = np.tile(b, (d, 1))
    if b.shape != (d, 2) or np.any(b[:, 1] <= b[:, 0]):
        raise ValidationError(f"box must be {d} (low, high) pairs with low < high", "box")
    return b


def _uniform(rng, box, size) -> np.ndarray:
    return box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((size, box.shape[0]))


def find_strict_anchor(
    spec: GaussianMixtureSpec, box=(-4.0, 4.0), seed=None, tol: float = STRICT_TOL, max_restarts: int = 10_000
) -> np.ndarray:
    """Point in ``box`` whose Bayes posterior is within ``tol`` of one half.

    Random chords are drawn until one has endpoints on opposite sides of
    the 0.5 level set, then the chord is bisected.
    """
    box = _box(box, spec.d)
    rng = np.random.default_rng(seed)
    batch = 256
    tried = 0
    while tried < max_restarts:
        m = min(batch, max_restarts - tried)
        a = _uniform(rng, box, m)
        b = _uniform(rng, box, m)
        tried += m
        ga = bayes_posteriors(spec, a) - 0.5
        gb = bayes_posteriors(spec, b) - 0.5
        hits = np.flatnonzero(np.isfinite(ga) & np.isfinite(gb) & (ga * gb <= 0))
        if hits.size == 0:
            continue
        r = hits[0]
        lo, hi, glo = a[r], b[r], ga[r]
        if abs(glo) <= tol:
            return lo
        if abs(gb[r]) <= tol:
            return hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = bayes_posterior(spec, mid) - 0.5
            if abs(gm) <= tol:
                return mid
            if (gm < 0) == (glo < 0):
                lo, glo = mid, gm
            else:
                hi = mid
        # level set is a discontinuity along this chord; keep searching
    raise AnchorSearchError(f"no chord straddling posterior 0.5 found in {max_restarts} restarts")


def sample_strict_anchors(spec, box=(-4.0, 4.0), k: int = 1, seed=None, tol: float = STRICT_TOL) -> AnchorSet:
    if k < 1:
        raise ValidationError("k must be >= 1", "k")
    seeds = seed_sequence(seed).spawn(k)
    pts = np.array([find_strict_anchor(spec, box, s, tol) for s in seeds])
    return AnchorSet(pts, 0.0, "strict", bayes_posteriors(spec, pts))


def sample_relaxed_anchors(
    spec: GaussianMixtureSpec, box=(-4.0, 4.0), delta: float = 0.05, k: int = 1, seed=None,
    min_acceptance: float = 1e-4,
) -> AnchorSet:
    """``k`` points uniform on ``{x in box : |eta(x) - 0.5| <= delta}`` by rejection."""
    if not 0.0 < delta <= 0.5:
        raise ValidationError(f"delta must be in (0, 0.5], got {delta}", "delta")
    if k < 1:
        raise ValidationError("k must be >= 1", "k")
    box = _box(box, spec.d)
    rng = np.random.default_rng(seed)
    budget = int(math.ceil(k / min_acceptance))
    accepted = []
    etas = []
    trials = 0
    while len(accepted) < k and trials < budget:
        m = min(4096, budget - trials)
        cand = _uniform(rng, box, m)
        trials += m
        eta = bayes_posteriors(spec, cand)
        ok = np.flatnonzero(np.abs(eta - 0.5) <= delta)
        for i in ok[: k - len(accepted)]:
            accepted.append(cand[i])
            etas.append(eta[i])
    if len(accepted) < k:
        raise AnchorSearchError(
            f"acceptance rate below {min_acceptance:g} ({len(accepted)} of {trials}); "
            "try a larger delta or box"
        )
    return AnchorSet(np.array(accepted), delta, "relaxed", np.array(etas))


def draw_anchors(spec, box, delta: float, k: int, seed) -> AnchorSet:
    """Strict anchors when ``delta == 0``, relaxed otherwise."""
    if delta == 0:
        return sample_strict_anchors(spec, box, k, seed)
    return sample_relaxed_anchors(spec, box, delta, k, seed)
