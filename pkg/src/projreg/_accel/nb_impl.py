"""Numba-jitted implementations of the hot kernels."""

import numpy as np
from numba import njit

BACKEND = "numba"


@njit(cache=True)
def _legendre_row(xi, k, out):
    # out[j] = sqrt((2j+1)/2) P_j(xi)
    out[0] = 1.0
    if k > 1:
        out[1] = xi
    for j in range(1, k - 1):
        out[j + 1] = ((2 * j + 1) * xi * out[j] - j * out[j - 1]) / (j + 1)
    for j in range(k):
        out[j] *= np.sqrt((2 * j + 1) / 2.0)


@njit(cache=True)
def _volterra_design_matrix(targets, n, k, l, gl_x, gl_w):
    m = targets.shape[0]
    G = gl_x.shape[0]
    h = 1.0 / n
    scale = np.sqrt(2.0 * n)
    out = np.zeros((m, n * k))
    phi = np.empty(k)
    for a in range(m):
        t = targets[a]
        for i in range(n):
            lo = i * h
            if t <= lo:
                break
            hi = min(t, lo + h)
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            for g in range(G):
                s = mid + half * gl_x[g]
                w = half * gl_w[g]
                ker = 1.0
                for _ in range(l - 1):
                    ker *= t - s
                xi = (s - lo) * (2.0 * n) - 1.0
                _legendre_row(xi, k, phi)
                for j in range(k):
                    out[a, i * k + j] += w * ker * scale * phi[j]
    return out


@njit(cache=True)
def _piecewise_eval(coeffs, n, k, ts):
    m = ts.shape[0]
    scale = np.sqrt(2.0 * n)
    out = np.empty(m)
    phi = np.empty(k)
    for a in range(m):
        idx = int(np.ceil(ts[a] * n)) - 1
        if idx < 0:
            idx = 0
        elif idx > n - 1:
            idx = n - 1
        xi = (ts[a] - idx / n) * (2.0 * n) - 1.0
        _legendre_row(xi, k, phi)
        v = 0.0
        for j in range(k):
            v += scale * phi[j] * coeffs[idx, j]
        out[a] = v
    return out


def volterra_design_matrix(targets, n, k, l, gl_x, gl_w):
    targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    return _volterra_design_matrix(targets, n, k, l,
                                   np.ascontiguousarray(gl_x),
                                   np.ascontiguousarray(gl_w))


def piecewise_eval(coeffs, n, k, ts):
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    c = np.ascontiguousarray(np.asarray(coeffs, dtype=np.float64).reshape(n, k))
    return _piecewise_eval(c, n, k, ts)


def orthonormal_legendre_table(xi, k):
    # only the matrix kernels are worth jitting; reuse the numpy version
    from . import np_impl
    return np_impl.orthonormal_legendre_table(xi, k)
