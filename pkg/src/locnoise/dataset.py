"""Labelled datasets, Gaussian-mixture generators, label noise and CSV I/O."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, ValidationError


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Instances in R^d with binary labels encoded as {0, 1}.

    Arrays are copied and frozen on construction.
    """

    instances: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        X = np.array(self.instances, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValidationError("instances must be an (n, d) array with d >= 1", "instances")
        y = np.asarray(self.labels)
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValidationError(
                f"labels length {y.shape} does not match {X.shape[0]} instances", "labels"
            )
        if y.size and not np.all((y == 0) | (y == 1)):
            raise ValidationError("labels must be in {0, 1}", "labels")
        if not np.all(np.isfinite(X)):
            raise ValidationError("instances must be finite", "instances")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "instances", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.instances.shape[0]

    @property
    def d(self) -> int:
        return self.instances.shape[1]

    @cached_property
    def y(self) -> np.ndarray:
        """Labels as float64, the form the likelihood kernels consume."""
        out = self.labels.astype(np.float64)
        out.setflags(write=False)
        return out

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            self.instances.shape == other.instances.shape
            and np.array_equal(self.instances, other.instances)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.instances[idx], self.labels[idx])

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.instances, labels)


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseSpec:
    """Class-conditional (CCN) or uniform (UN) label noise.

    ``alpha`` is P(noisy=0 | clean=1) and ``beta`` is P(noisy=1 | clean=0).
    For UN both equal ``tau``; for CCN ``tau`` is None.
    """

    kind: str
    alpha: float
    beta: float
    tau: float | None = None

    def __post_init__(self):
        kind = str(self.kind).upper()
        object.__setattr__(self, "kind", kind)
        if kind not in ("CCN", "UN"):
            raise ValidationError(f"unknown noise kind {self.kind!r}", "kind")
        for name in ("alpha", "beta"):
            v = float(getattr(self, name))
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]", name)
            object.__setattr__(self, name, v)
        if kind == "UN":
            if self.tau is None:
                raise ValidationError("UN noise requires tau", "tau")
            tau = float(self.tau)
            object.__setattr__(self, "tau", tau)
            if not 0.0 <= tau <= 1.0:
                raise ValidationError(f"tau={tau} outside [0, 1]", "tau")
            if not 2.0 * tau < 1.0:
                raise ValidationError(f"UN noise needs 2*tau < 1, got tau={tau}", "tau")
            if self.alpha != tau or self.beta != tau:
                raise ValidationError("UN noise requires alpha == beta == tau", "tau")
        elif self.tau is not None:
            raise ValidationError("tau is only meaningful for UN noise", "tau")
        if not self.alpha + self.beta < 1.0:
            raise ValidationError(
                f"alpha + beta must be < 1, got {self.alpha} + {self.beta}", "alpha"
            )

    @classmethod
    def ccn(cls, alpha: float, beta: float) -> "NoiseSpec":
        return cls("CCN", alpha, beta)

    @classmethod
    def un(cls, tau: float) -> "NoiseSpec":
        return cls("UN", tau, tau, tau)

    @property
    def is_clean(self) -> bool:
        return self.alpha == 0.0 and self.beta == 0.0

    @property
    def label(self) -> str:
        if self.kind == "UN":
            return f"UN({self.tau:g})"
        return f"CCN({self.alpha:g},{self.beta:g})"

    def to_dict(self) -> dict:
        if self.kind == "UN":
            return {"kind": "UN", "tau": self.tau}
        return {"kind": "CCN", "alpha": self.alpha, "beta": self.beta}

    @classmethod
    def from_dict(cls, d) -> "NoiseSpec":
        if isinstance(d, (list, tuple)):
            return cls.ccn(*d)
        kind = str(d.get("kind", "CCN")).upper()
        if kind == "UN":
            return cls.un(d["tau"])
        return cls.ccn(d.get("alpha", 0.0), d.get("beta", 0.0))


def noisy_posterior(eta: float, spec: NoiseSpec) -> float:
    """Posterior of the corrupted label given the clean posterior ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"eta={eta} outside [0, 1]", "eta")
    if spec.kind == "UN":
        out = (1.0 - 2.0 * spec.tau) * eta + spec.tau
    else:
        out = (1.0 - spec.alpha - spec.beta) * eta + spec.beta
    return min(1.0, max(0.0, out))


def inject_noise(ds: LabeledDataset, spec: NoiseSpec, seed) -> LabeledDataset:
    """Flip each label independently at its class rate (1->0 w.p. alpha, 0->1 w.p. beta)."""
    rng = np.random.default_rng(seed)
    u = rng.random(ds.n)
    rate = np.where(ds.labels == 1, spec.alpha, spec.beta)
    flip = u < rate
    return ds.with_labels(np.where(flip, 1 - ds.labels, ds.labels))


# ---------------------------------------------------------------------------
# Gaussian mixtures


@dataclass(frozen=True)
class MixtureComponent:
    center: tuple
    scale: float = 1.0
    weight: float = 1.0


def _as_components(comps) -> tuple:
    out = []
    for c in comps:
        if isinstance(c, MixtureComponent):
            out.append(MixtureComponent(tuple(float(v) for v in c.center), float(c.scale), float(c.weight)))
        elif isinstance(c, dict):
            out.append(
                MixtureComponent(
                    tuple(float(v) for v in c["center"]),
                    float(c.get("scale", 1.0)),
                    float(c.get("weight", 1.0)),
                )
            )
        else:
            out.append(MixtureComponent(tuple(float(v) for v in c)))
    return tuple(out)


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Per-class isotropic Gaussian mixtures with class priors.

    ``components[c]`` lists the components of class ``c``; ``priors`` is
    ``(P(y=0), P(y=1))``.  Weights within a class must sum to 1.
    """

    components: tuple
    priors: tuple = (0.5, 0.5)
    name: str = "custom"

    def __post_init__(self):
        comps = tuple(_as_components(cls) for cls in self.components)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "priors", tuple(float(p) for p in self.priors))
        if len(comps) != 2:
            raise ValidationError("exactly two classes are required", "components")
        if len(self.priors) != 2 or any(p < 0 for p in self.priors):
            raise ValidationError("priors must be two non-negative numbers", "priors")
        if not math.isclose(sum(self.priors), 1.0, abs_tol=1e-9):
            raise ValidationError(f"priors sum to {sum(self.priors)}, not 1", "priors")
        dims = set()
        for c, cls in enumerate(comps):
            if not cls:
                raise ValidationError(f"class {c} has no components", "components")
            for comp in cls:
                dims.add(len(comp.center))
                if not comp.scale > 0:
                    raise ValidationError(f"class {c} scale {comp.scale} must be > 0", "scale")
                if not comp.weight > 0:
                    raise ValidationError(f"class {c} weight {comp.weight} must be > 0", "weight")
            total = sum(comp.weight for comp in cls)
            if not math.isclose(total, 1.0, abs_tol=1e-9):
                raise ValidationError(f"class {c} weights sum to {total}, not 1", "weight")
        if len(dims) != 1 or 0 in dims:
            raise ValidationError("all centers must share one dimension d >= 1", "center")

    @property
    def d(self) -> int:
        return len(self.components[0][0].center)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "priors": list(self.priors),
            "classes": [
                [{"center": list(c.center), "scale": c.scale, "weight": c.weight} for c in cls]
                for cls in self.components
            ],
        }

    @classmethod
    def from_dict(cls, d) -> "GaussianMixtureSpec":
        if isinstance(d, str):
            return PRESETS[d]()
        if "preset" in d:
            return PRESETS[d["preset"]]()
        return cls(tuple(d["classes"]), tuple(d.get("priors", (0.5, 0.5))), d.get("name", "custom"))


def _equal_weight_class(centers, scale=1.0):
    w = 1.0 / len(centers)
    return tuple(MixtureComponent(tuple(map(float, c)), scale, w) for c in centers)


def symmetric_xor(scale: float = 1.0) -> GaussianMixtureSpec:
    """Class 1 at (2,2),(-2,-2); class 0 at (-2,2),(2,-2); equal weights and priors."""
    return GaussianMixtureSpec(
        (
            _equal_weight_class([(-2, 2), (2, -2)], scale),
            _equal_weight_class([(2, 2), (-2, -2)], scale),
        ),
        (0.5, 0.5),
        "symmetric_xor",
    )


def asymmetric_xor(scale: float = 1.0) -> GaussianMixtureSpec:
    """Class 1 at (4,4),(-2,-2); class 0 at (-1,1),(1,-1); equal weights and priors."""
    return GaussianMixtureSpec(
        (
            _equal_weight_class([(-1, 1), (1, -1)], scale),
            _equal_weight_class([(4, 4), (-2, -2)], scale),
        ),
        (0.5, 0.5),
        "asymmetric_xor",
    )


PRESETS = {"symmetric_xor": symmetric_xor, "asymmetric_xor": asymmetric_xor}


def gen_mixture(spec: GaussianMixtureSpec, n: int, seed) -> LabeledDataset:
    """Draw ``n`` i.i.d. labelled points: class, then component, then the Gaussian."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}", "n")
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < spec.priors[1]).astype(np.int64)
    X = np.empty((n, spec.d))
    z = rng.standard_normal((n, spec.d))
    u = rng.random(n)
    for c in (0, 1):
        comps = spec.components[c]
        cum = np.cumsum([comp.weight for comp in comps])
        cum[-1] = 1.0
        rows = np.flatnonzero(y == c)
        which = np.searchsorted(cum, u[rows], side="right")
        centers = np.array([comp.center for comp in comps])
        scales = np.array([comp.scale for comp in comps])
        X[rows] = centers[which] + scales[which, None] * z[rows]
    return LabeledDataset(X, y)


# ---------------------------------------------------------------------------
# CSV


def save_csv(ds: LabeledDataset, path) -> None:
    """Write ``x1,...,xd,y`` with round-trip float precision."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(ds.d)] + ["y"])
        for row, label in zip(ds.instances, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def _parse_label(tok: str, line: int) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"label {tok!r} is not numeric", line) from None
    if v not in (-1.0, 0.0, 1.0):
        raise ParseError(f"label {tok!r} not in {{-1, 0, 1}}", line)
    return int(v)


def load_csv(path) -> LabeledDataset:
    """Read a labelled CSV; labels in {-1,1} or {0,1} are mapped to {0,1}."""
    path = Path(path)
    X: list[list[float]] = []
    raw: list[int] = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip().lower().startswith("x"):
                width = len(row)
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", lineno)
            if width < 2:
                raise ParseError("need at least one feature column and a label", lineno)
            try:
                X.append([float(c) for c in row[:-1]])
            except ValueError:
                raise ParseError(f"non-numeric feature in {row[:-1]}", lineno) from None
            raw.append(_parse_label(row[-1].strip(), lineno))
    if not raw:
        raise ParseError(f"{path} contains no data rows")
    alphabet = set(raw)
    if -1 in alphabet and 0 in alphabet:
        raise ParseError("labels mix the {-1,1} and {0,1} alphabets")
    y = np.array([0 if v == -1 else v for v in raw], dtype=np.int64)
    return LabeledDataset(np.array(X, dtype=np.float64), y)


def load_points_csv(path, d: int | None = None) -> tuple[np.ndarray, np.ndarray | None]:
    """Read ``x1..xd[,eta]`` rows as used for anchor files.

    Returns the points and, if an ``eta`` column is present, the posteriors.
    """
    path = Path(path)
    rows: list[list[float]] = []
    header: Sequence[str] | None = None
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and row[0].strip().lower().startswith("x"):
                header = [c.strip().lower() for c in row]
                continue
            expected = len(header) if header is not None else (len(rows[0]) if rows else len(row))
            if len(row) != expected:
                raise ParseError(f"expected {expected} fields, got {len(row)}", lineno)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError(f"non-numeric value in {row}", lineno) from None
    if not rows:
        raise ParseError(f"{path} contains no points")
    arr = np.array(rows, dtype=np.float64)
    has_eta = header is not None and header[-1] == "eta"
    if header is None and d is not None and arr.shape[1] == d + 1:
        has_eta = True
    if has_eta:
        return arr[:, :-1], arr[:, -1]
    return arr, None


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-feature z-scoring fitted on a training set."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, ds: LabeledDataset) -> "Standardizer":
        scale = np.std(ds.instances, axis=0)
        scale[scale == 0] = 1.0
        return cls(np.mean(ds.instances, axis=0), scale)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        return LabeledDataset(self.transform(ds.instances), ds.labels)
