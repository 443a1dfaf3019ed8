"""Vectorised numpy implementations of the hot kernels.

Every function here has a twin with the same signature in
``_numba_kernels``; the two are checked against each other in the test
suite.
"""
import numpy as np

from ._accel import CONVERGED, MAX_ITERATIONS, SEPARATION, SINGULAR, STALLED

INV_SQRT_2PI = 0.3989422804014327

# relative pivot floor for the Cholesky factor of the negative Hessian
PIVOT_RTOL = 1e-12
# a converged fit also needs |step| <= STEP_RTOL * (1 + |beta|)
STEP_RTOL = 1e-6


def basis_length(d, order):
    if order == 0:
        return 1
    if order == 1:
        return 1 + d
    return 1 + d + d * (d + 1) // 2


def design_matrix(X, x0, order):
    """Rows A_p(x_i - x0) of the recentred polynomial basis."""
    V = X - x0
    n, d = V.shape
    A = np.empty((n, basis_length(d, order)))
    A[:, 0] = 1.0
    if order >= 1:
        A[:, 1:d + 1] = V
    if order >= 2:
        col = d + 1
        for a in range(d):
            for b in range(a, d):
                if a == b:
                    A[:, col] = 0.5 * V[:, a] * V[:, a]
                else:
                    A[:, col] = V[:, a] * V[:, b]
                col += 1
    return A


def gaussian_weights(X, x0, h):
    U = (X - x0) / h
    d = X.shape[1]
    return INV_SQRT_2PI ** d * np.exp(-0.5 * np.sum(U * U, axis=1))


def _softplus(xi):
    return np.maximum(xi, 0.0) + np.log1p(np.exp(-np.abs(xi)))


def _expit(xi):
    out = np.empty_like(xi)
    pos = xi >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xi[pos]))
    e = np.exp(xi[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def loglik(A, y, w, beta):
    xi = A @ beta
    return float(np.sum(w * (y * xi - _softplus(xi))))


def _chol_solve(M, rhs, scale):
    m = M.shape[0]
    L = np.zeros_like(M)
    for j in range(m):
        s = M[j, j] - L[j, :j] @ L[j, :j]
        if not s > PIVOT_RTOL * scale:
            return None
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, m):
            L[i, j] = (M[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    z = np.empty(m)
    for i in range(m):
        z[i] = (rhs[i] - L[i, :i] @ z[:i]) / L[i, i]
    x = np.empty(m)
    for i in range(m - 1, -1, -1):
        x[i] = (z[i] - L[i + 1:, i] @ x[i + 1:]) / L[i, i]
    return x


def newton_logistic(A, y, w, max_iter, tol, ridge, halving_max, cap):
    """Safeguarded Newton-Raphson for the weighted logistic likelihood.

    Converged means the gradient sup-norm is within ``tol`` and the Newton
    step is negligible; the step is then applied as a final polish.  A
    diverging intercept keeps taking unit-size steps until it hits ``cap``.
    Returns ``(beta, status, iterations, grad_inf_norm)``.
    """
    m = A.shape[1]
    beta = np.zeros(m)
    ll = loglik(A, y, w, beta)
    status = MAX_ITERATIONS
    it = 0
    while True:
        p = _expit(A @ beta)
        g = A.T @ (w * (y - p))
        gnorm = float(np.max(np.abs(g)))
        Hn = (A * (w * p * (1.0 - p))[:, None]).T @ A
        scale = float(np.max(np.diag(Hn)))
        if not scale > 0.0 or not np.isfinite(scale):
            status = SINGULAR
            break
        step = _chol_solve(Hn + ridge * np.eye(m), g, scale)
        if step is None:
            status = SINGULAR
            break
        if gnorm <= tol and np.max(np.abs(step)) <= STEP_RTOL * (1.0 + np.max(np.abs(beta))):
            beta = beta + step
            status = CONVERGED
            break
        if it >= max_iter:
            break
        it += 1
        t = 1.0
        accepted = False
        floor = ll - 1e-13 * (1.0 + abs(ll))
        for _ in range(halving_max + 1):
            cand = beta + t * step
            ll_cand = loglik(A, y, w, cand)
            if ll_cand >= floor:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            status = STALLED
            break
        beta = cand
        ll = ll_cand
        if abs(beta[0]) > cap:
            beta[0] = np.sign(beta[0]) * cap
            status = SEPARATION
            break
    p = _expit(A @ beta)
    gnorm = float(np.max(np.abs(A.T @ (w * (y - p)))))
    return beta, status, it, gnorm


def sandwich_parts(A, y, w, beta):
    """Bread ``sum w p(1-p) a a^T`` and meat ``sum (y-p)^2 w^2 a a^T``."""
    p = _expit(A @ beta)
    B = (A * (w * p * (1.0 - p))[:, None]).T @ A
    r = (y - p) * w
    C = (A * (r * r)[:, None]).T @ A
    return B, C


def cross_meat(Ak, Aj, y, wk, wj, bk, bj):
    rk = (y - _expit(Ak @ bk)) * wk
    rj = (y - _expit(Aj @ bj)) * wj
    return (Ak * (rk * rj)[:, None]).T @ Aj


def loo_fits(X, y, idx, h, order, max_iter, tol, ridge, halving_max, cap):
    """Held-out intercepts ``xi_(-i)(x_i)`` and fit status for each ``i`` in idx."""
    xi = np.zeros(len(idx))
    status = np.zeros(len(idx), dtype=np.int64)
    for r, i in enumerate(idx):
        x0 = X[i]
        A = design_matrix(X, x0, order)
        w = gaussian_weights(X, x0, h)
        w[i] = 0.0
        beta, st, _, _ = newton_logistic(A, y, w, max_iter, tol, ridge, halving_max, cap)
        xi[r] = beta[0]
        status[r] = st
    return xi, status
