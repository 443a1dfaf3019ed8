"""Loop-based numba implementations of the hot kernels.

Signatures and semantics mirror ``_numpy_kernels`` exactly.  Compiled
lazily on first call and cached on disk.
"""
import math

import numpy as np
from numba import njit

from ._accel import CONVERGED, MAX_ITERATIONS, SEPARATION, SINGULAR, STALLED
from ._numpy_kernels import INV_SQRT_2PI, PIVOT_RTOL, STEP_RTOL


@njit(cache=True)
def _basis_len(d, order):
    if order == 0:
        return 1
    if order == 1:
        return 1 + d
    return 1 + d + d * (d + 1) // 2


@njit(cache=True)
def design_matrix(X, x0, order):
    n, d = X.shape
    m = _basis_len(d, order)
    A = np.empty((n, m))
    for i in range(n):
        A[i, 0] = 1.0
        if order >= 1:
            for a in range(d):
                A[i, 1 + a] = X[i, a] - x0[a]
        if order >= 2:
            col = d + 1
            for a in range(d):
                va = X[i, a] - x0[a]
                for b in range(a, d):
                    vb = X[i, b] - x0[b]
                    if a == b:
                        A[i, col] = 0.5 * va * va
                    else:
                        A[i, col] = va * vb
                    col += 1
    return A


@njit(cache=True)
def gaussian_weights(X, x0, h):
    n, d = X.shape
    norm = INV_SQRT_2PI ** d
    w = np.empty(n)
    for i in range(n):
        s = 0.0
        for a in range(d):
            u = (X[i, a] - x0[a]) / h
            s += u * u
        w[i] = norm * math.exp(-0.5 * s)
    return w


@njit(cache=True)
def _softplus(xi):
    if xi > 0.0:
        return xi + math.log1p(math.exp(-xi))
    return math.log1p(math.exp(xi))


@njit(cache=True)
def _expit(xi):
    if xi >= 0.0:
        return 1.0 / (1.0 + math.exp(-xi))
    e = math.exp(xi)
    return e / (1.0 + e)


@njit(cache=True)
def _dot_row(A, i, beta):
    s = 0.0
    for j in range(A.shape[1]):
        s += A[i, j] * beta[j]
    return s


@njit(cache=True)
def loglik(A, y, w, beta):
    total = 0.0
    for i in range(A.shape[0]):
        if w[i] == 0.0:
            continue
        xi = _dot_row(A, i, beta)
        total += w[i] * (y[i] * xi - _softplus(xi))
    return total


@njit(cache=True)
def _grad_hess(A, y, w, beta, g, Hn):
    n, m = A.shape
    g[:] = 0.0
    Hn[:, :] = 0.0
    for i in range(n):
        wi = w[i]
        if wi == 0.0:
            continue
        p = _expit(_dot_row(A, i, beta))
        r = wi * (y[i] - p)
        c = wi * p * (1.0 - p)
        for a in range(m):
            g[a] += r * A[i, a]
            ca = c * A[i, a]
            for b in range(a + 1):
                Hn[a, b] += ca * A[i, b]
    for a in range(m):
        for b in range(a):
            Hn[b, a] = Hn[a, b]


@njit(cache=True)
def _grad_inf(A, y, w, beta):
    n, m = A.shape
    g = np.zeros(m)
    for i in range(n):
        if w[i] == 0.0:
            continue
        r = w[i] * (y[i] - _expit(_dot_row(A, i, beta)))
        for a in range(m):
            g[a] += r * A[i, a]
    out = 0.0
    for a in range(m):
        if abs(g[a]) > out:
            out = abs(g[a])
    return out


@njit(cache=True)
def _chol_solve(M, rhs, scale, out):
    m = M.shape[0]
    L = np.zeros((m, m))
    for j in range(m):
        s = M[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > PIVOT_RTOL * scale:
            return False
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, m):
            t = M[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    z = np.empty(m)
    for i in range(m):
        t = rhs[i]
        for k in range(i):
            t -= L[i, k] * z[k]
        z[i] = t / L[i, i]
    for i in range(m - 1, -1, -1):
        t = z[i]
        for k in range(i + 1, m):
            t -= L[k, i] * out[k]
        out[i] = t / L[i, i]
    return True


@njit(cache=True)
def newton_logistic(A, y, w, max_iter, tol, ridge, halving_max, cap):
    m = A.shape[1]
    beta = np.zeros(m)
    cand = np.zeros(m)
    step = np.zeros(m)
    g = np.zeros(m)
    Hn = np.zeros((m, m))
    ll = loglik(A, y, w, beta)
    status = MAX_ITERATIONS
    it = 0
    while True:
        _grad_hess(A, y, w, beta, g, Hn)
        gnorm = 0.0
        scale = 0.0
        for a in range(m):
            if abs(g[a]) > gnorm:
                gnorm = abs(g[a])
            if Hn[a, a] > scale:
                scale = Hn[a, a]
        if not scale > 0.0 or not math.isfinite(scale):
            status = SINGULAR
            break
        for a in range(m):
            Hn[a, a] += ridge
        if not _chol_solve(Hn, g, scale, step):
            status = SINGULAR
            break
        if gnorm <= tol:
            smax = 0.0
            bmax = 0.0
            for a in range(m):
                smax = max(smax, abs(step[a]))
                bmax = max(bmax, abs(beta[a]))
            if smax <= STEP_RTOL * (1.0 + bmax):
                for a in range(m):
                    beta[a] += step[a]
                status = CONVERGED
                break
        if it >= max_iter:
            break
        it += 1
        t = 1.0
        accepted = False
        floor = ll - 1e-13 * (1.0 + abs(ll))
        ll_cand = ll
        for _ in range(halving_max + 1):
            for a in range(m):
                cand[a] = beta[a] + t * step[a]
            ll_cand = loglik(A, y, w, cand)
            if ll_cand >= floor:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            status = STALLED
            break
        beta[:] = cand
        ll = ll_cand
        if abs(beta[0]) > cap:
            beta[0] = cap if beta[0] > 0 else -cap
            status = SEPARATION
            break
    return beta, status, it, _grad_inf(A, y, w, beta)


@njit(cache=True)
def sandwich_parts(A, y, w, beta):
    n, m = A.shape
    B = np.zeros((m, m))
    C = np.zeros((m, m))
    for i in range(n):
        p = _expit(_dot_row(A, i, beta))
        b = w[i] * p * (1.0 - p)
        r = (y[i] - p) * w[i]
        c = r * r
        for a in range(m):
            for k in range(m):
                aa = A[i, a] * A[i, k]
                B[a, k] += b * aa
                C[a, k] += c * aa
    return B, C


@njit(cache=True)
def cross_meat(Ak, Aj, y, wk, wj, bk, bj):
    n, m = Ak.shape
    mj = Aj.shape[1]
    M = np.zeros((m, mj))
    for i in range(n):
        rk = (y[i] - _expit(_dot_row(Ak, i, bk))) * wk[i]
        rj = (y[i] - _expit(_dot_row(Aj, i, bj))) * wj[i]
        c = rk * rj
        for a in range(m):
            for b in range(mj):
                M[a, b] += c * Ak[i, a] * Aj[i, b]
    return M


@njit(cache=True)
def loo_fits(X, y, idx, h, order, max_iter, tol, ridge, halving_max, cap):
    xi = np.zeros(len(idx))
    status = np.zeros(len(idx), dtype=np.int64)
    for r in range(len(idx)):
        i = idx[r]
        x0 = X[i].copy()
        A = design_matrix(X, x0, order)
        w = gaussian_weights(X, x0, h)
        w[i] = 0.0
        beta, st, _, _ = newton_logistic(A, y, w, max_iter, tol, ridge, halving_max, cap)
        xi[r] = beta[0]
        status[r] = st
    return xi, status
