"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

Two loops dominate runtime: the cyclic coordinate descent solver and the
Huber location sweep over predictor pairs. Each has a numba ``@njit``
version and a fallback with the same update order. The fallback is selected
when numba is unavailable or when the environment variable
``ADAPDISCOM_NO_NUMBA`` is set to a non-empty value other than ``0``.

``benchmarks/bench_kernels.py`` compares the two paths.
"""

import os

import numpy as np

_flag = os.environ.get("ADAPDISCOM_NO_NUMBA", "").strip()
_want_numba = _flag in ("", "0")

NUMBA_ENABLED = False
if _want_numba:
    try:
        from numba import njit, prange

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def using_numba():
    """True when the jitted kernel path is active."""
    return NUMBA_ENABLED


# ---------------------------------------------------------------------------
# coordinate descent
# ---------------------------------------------------------------------------

def _cd_solve_impl(sigma, c, lam, beta, sb, free, tol, max_sweeps, active_set):
    """Cyclic coordinate descent on 0.5*b'Sb - c'b + lam*|b|_1.

    ``beta`` and ``sb = sigma @ beta`` are updated in place. Outer loop runs
    a full sweep, then (optionally) iterates on the nonzero support until
    stable, then confirms with another full sweep. Returns (sweeps, converged).

    This is the fallback; the jitted twin below replaces the vectorized
    ``sb`` update with an explicit loop (no temporary) but performs the same
    elementwise operations, so both paths produce identical iterates.
    """
    p = beta.shape[0]
    sweeps = 0
    while sweeps < max_sweeps:
        delta = 0.0
        for j in range(p):
            if not free[j]:
                continue
            sjj = sigma[j, j]
            rho = c[j] - sb[j] + sjj * beta[j]
            if rho > lam:
                bnew = (rho - lam) / sjj
            elif rho < -lam:
                bnew = (rho + lam) / sjj
            else:
                bnew = 0.0
            diff = bnew - beta[j]
            if diff != 0.0:
                beta[j] = bnew
                sb += sigma[j] * diff
                ad = abs(diff)
                if ad > delta:
                    delta = ad
        sweeps += 1
        if delta <= tol:
            return sweeps, 1
        if active_set:
            while sweeps < max_sweeps:
                delta = 0.0
                for j in range(p):
                    if not free[j] or beta[j] == 0.0:
                        continue
                    sjj = sigma[j, j]
                    rho = c[j] - sb[j] + sjj * beta[j]
                    if rho > lam:
                        bnew = (rho - lam) / sjj
                    elif rho < -lam:
                        bnew = (rho + lam) / sjj
                    else:
                        bnew = 0.0
                    diff = bnew - beta[j]
                    if diff != 0.0:
                        beta[j] = bnew
                        sb += sigma[j] * diff
                        ad = abs(diff)
                        if ad > delta:
                            delta = ad
                sweeps += 1
                if delta <= tol:
                    break
    return sweeps, 0


def _cd_solve_loops(sigma, c, lam, beta, sb, free, tol, max_sweeps, active_set):
    p = beta.shape[0]
    sweeps = 0
    while sweeps < max_sweeps:
        delta = 0.0
        for j in range(p):
            if not free[j]:
                continue
            sjj = sigma[j, j]
            rho = c[j] - sb[j] + sjj * beta[j]
            if rho > lam:
                bnew = (rho - lam) / sjj
            elif rho < -lam:
                bnew = (rho + lam) / sjj
            else:
                bnew = 0.0
            diff = bnew - beta[j]
            if diff != 0.0:
                beta[j] = bnew
                for t in range(p):
                    sb[t] += sigma[j, t] * diff
                ad = abs(diff)
                if ad > delta:
                    delta = ad
        sweeps += 1
        if delta <= tol:
            return sweeps, 1
        if active_set:
            while sweeps < max_sweeps:
                delta = 0.0
                for j in range(p):
                    if not free[j] or beta[j] == 0.0:
                        continue
                    sjj = sigma[j, j]
                    rho = c[j] - sb[j] + sjj * beta[j]
                    if rho > lam:
                        bnew = (rho - lam) / sjj
                    elif rho < -lam:
                        bnew = (rho + lam) / sjj
                    else:
                        bnew = 0.0
                    diff = bnew - beta[j]
                    if diff != 0.0:
                        beta[j] = bnew
                        for t in range(p):
                            sb[t] += sigma[j, t] * diff
                        ad = abs(diff)
                        if ad > delta:
                            delta = ad
                sweeps += 1
                if delta <= tol:
                    break
    return sweeps, 0


# ---------------------------------------------------------------------------
# Huber location
# ---------------------------------------------------------------------------

def _huber_location_impl(values, H, tol):
    """Midpoint of the root interval of g(mu) = sum(psi_H(v_i - mu)).

    g is continuous and non-increasing, positive at min(v)-H and negative at
    max(v)+H; the root set is a closed interval whose edges are located by
    two predicate bisections.
    """
    n = values.shape[0]
    vmin = values[0]
    vmax = values[0]
    for i in range(1, n):
        if values[i] < vmin:
            vmin = values[i]
        if values[i] > vmax:
            vmax = values[i]
    lo0 = vmin - H
    hi0 = vmax + H
    if hi0 - lo0 <= tol:
        return 0.5 * (lo0 + hi0)

    lo = lo0
    hi = hi0
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        g = 0.0
        for i in range(n):
            d = values[i] - mid
            if d > H:
                d = H
            elif d < -H:
                d = -H
            g += d
        if g > 0.0:
            lo = mid
        else:
            hi = mid
    left = 0.5 * (lo + hi)

    lo = lo0
    hi = hi0
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        g = 0.0
        for i in range(n):
            d = values[i] - mid
            if d > H:
                d = H
            elif d < -H:
                d = -H
            g += d
        if g < 0.0:
            hi = mid
        else:
            lo = mid
    right = 0.5 * (lo + hi)
    return 0.5 * (left + right)


def _huber_sigma_sweep_py(X, mask, H, tol):
    """Vectorized fallback: bisection over all pairs of one row at a time."""
    n, p = X.shape
    out = np.zeros((p, p))
    W = mask.astype(np.float64)
    for j in range(p):
        cols = np.arange(j, p)
        P = X[:, j:p] * X[:, [j]]
        Wj = W[:, j:p] * W[:, [j]]
        Hj = H[j, j:p]
        roots = _huber_bisect_cols(P, Wj, Hj, tol)
        out[j, cols] = roots
        out[cols, j] = roots
    return out


def _huber_c_sweep_py(X, mask, y, H, tol):
    P = X * y[:, None]
    return _huber_bisect_cols(P, mask.astype(np.float64), H, tol)


def _huber_bisect_cols(P, W, H, tol):
    """Column-wise root-interval bisection; masked entries carry zero weight."""
    Pm = np.where(W > 0, P, np.nan)
    vmin = np.nanmin(Pm, axis=0)
    vmax = np.nanmax(Pm, axis=0)
    lo0 = vmin - H
    hi0 = vmax + H

    def g(mu):
        D = np.clip(P - mu[None, :], -H[None, :], H[None, :])
        return np.sum(D * W, axis=0)

    lo, hi = lo0.copy(), hi0.copy()
    for _ in range(200):
        if np.max(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        pos = g(mid) > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    left = 0.5 * (lo + hi)

    lo, hi = lo0.copy(), hi0.copy()
    for _ in range(200):
        if np.max(hi - lo) <= tol:
            break
        mid = 0.5 * (lo + hi)
        neg = g(mid) < 0.0
        hi = np.where(neg, mid, hi)
        lo = np.where(neg, lo, mid)
    right = 0.5 * (lo + hi)
    return 0.5 * (left + right)


if NUMBA_ENABLED:
    cd_solve = njit(cache=True, nogil=True)(_cd_solve_loops)
    huber_location_kernel = njit(cache=True, nogil=True)(_huber_location_impl)

    @njit(cache=True, parallel=True)
    def huber_sigma_sweep(X, mask, H, tol):
        n, p = X.shape
        out = np.zeros((p, p))
        for j in prange(p):
            buf = np.empty(n)
            for t in range(j, p):
                m = 0
                for i in range(n):
                    if mask[i, j] and mask[i, t]:
                        buf[m] = X[i, j] * X[i, t]
                        m += 1
                out[j, t] = huber_location_kernel(buf[:m], H[j, t], tol)
                out[t, j] = out[j, t]
        return out

    @njit(cache=True, parallel=True)
    def huber_c_sweep(X, mask, y, H, tol):
        n, p = X.shape
        out = np.zeros(p)
        for j in prange(p):
            buf = np.empty(n)
            m = 0
            for i in range(n):
                if mask[i, j]:
                    buf[m] = X[i, j] * y[i]
                    m += 1
            out[j] = huber_location_kernel(buf[:m], H[j], tol)
        return out

else:
    cd_solve = _cd_solve_impl
    huber_location_kernel = _huber_location_impl
    huber_sigma_sweep = _huber_sigma_sweep_py
    huber_c_sweep = _huber_c_sweep_py
