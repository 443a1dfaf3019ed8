"""Dispatch to the numba or numpy kernel backend (see ``_accel``)."""
from ._accel import USE_NUMBA

if USE_NUMBA:
    from . import _numba_kernels as _impl

    BACKEND = "numba"
else:
    from . import _numpy_kernels as _impl

    BACKEND = "numpy"

design_matrix = _impl.design_matrix
gaussian_weights = _impl.gaussian_weights
loglik = _impl.loglik
newton_logistic = _impl.newton_logistic
sandwich_parts = _impl.sandwich_parts
cross_meat = _impl.cross_meat
loo_fits = _impl.loo_fits
