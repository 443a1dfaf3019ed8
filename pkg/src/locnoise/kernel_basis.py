"""Gaussian product kernel weights and the recentred polynomial basis."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._numpy_kernels import INV_SQRT_2PI, basis_length
from .errors import ValidationError


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel with one bandwidth ``h`` shared by every dimension."""

    h: float
    family: str = "gaussian"

    def __post_init__(self):
        if self.family != "gaussian":
            raise ValidationError(f"unsupported kernel family {self.family!r}", "family")
        h = float(self.h)
        if not (h > 0 and math.isfinite(h)):
            raise ValidationError(f"bandwidth must be positive and finite, got {self.h}", "h")
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class BasisSpec:
    order: int = 1
    d: int = 1

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise ValidationError(f"basis order must be 0, 1 or 2, got {self.order}", "order")
        if self.d < 1:
            raise ValidationError(f"dimension must be >= 1, got {self.d}", "d")

    @property
    def length(self) -> int:
        return basis_length(self.d, self.order)


def kernel_value(u: float) -> float:
    return INV_SQRT_2PI * math.exp(-0.5 * u * u)


def weights(x, ds, k: KernelSpec) -> np.ndarray:
    """Product-kernel weights ``prod_j K((x_j - x_ij) / h)`` for every row of ``ds``."""
    x = np.ascontiguousarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != ds.d:
        raise ValidationError(f"point has dimension {x.shape[0]}, data has {ds.d}", "x")
    return _kernels.gaussian_weights(ds.instances, x, k.h)


def basis(v, b: BasisSpec) -> np.ndarray:
    """Polynomial basis ``A_p(v)``.

    Order 2 in two dimensions gives ``[1, v0, v1, v0**2/2, v0*v1, v1**2/2]``.
    """
    v = np.ascontiguousarray(v, dtype=np.float64).reshape(1, -1)
    if v.shape[1] != b.d:
        raise ValidationError(f"vector has dimension {v.shape[1]}, basis expects {b.d}", "v")
    return _kernels.design_matrix(v, np.zeros(b.d), b.order)[0]


def design(ds, x0, b: BasisSpec) -> np.ndarray:
    """Rows ``A_p(x_i - x0)`` for the whole dataset."""
    x0 = np.ascontiguousarray(x0, dtype=np.float64).reshape(-1)
    return _kernels.design_matrix(ds.instances, x0, b.order)
