"""Pure-numpy implementations of the hot kernels (fallback backend)."""

import numpy as np

BACKEND = "numpy"


def orthonormal_legendre_table(xi, k):
    """Values of the first k orthonormal Legendre polynomials at xi in [-1,1].

    Orthonormal w.r.t. the L2(-1,1) inner product, i.e. scaled by
    sqrt((2j+1)/2).  Returns an array of shape xi.shape + (k,).
    """
    xi = np.asarray(xi, dtype=np.float64)
    out = np.empty(xi.shape + (k,))
    out[..., 0] = 1.0
    if k > 1:
        out[..., 1] = xi
    for j in range(1, k - 1):
        out[..., j + 1] = ((2 * j + 1) * xi * out[..., j] - j * out[..., j - 1]) / (j + 1)
    scale = np.sqrt((2 * np.arange(k) + 1) / 2.0)
    return out * scale


def volterra_design_matrix(targets, n, k, l, gl_x, gl_w):
    """Exact integrals of the Volterra kernel against the spline basis.

    Entry (a, i*k + j) is  int_0^{t_a} (t_a - s)^(l-1) phi_{i,j}(s) ds
    where phi_{i,j} is the j-th orthonormal Legendre polynomial on cell i
    of the uniform n-cell mesh of [0,1].  Each cell is clipped at t_a, so
    the integrand is a polynomial of degree k+l-2 on every segment and the
    Gauss rule (gl_x, gl_w) integrates it exactly.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    h = 1.0 / n
    lo = np.arange(n) * h
    hi = np.clip(targets[:, None], lo, lo + h)        # (m, n) upper limits
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    s = mid[..., None] + half[..., None] * gl_x        # (m, n, G)
    w = half[..., None] * gl_w
    if l == 1:
        ker = np.ones_like(s)
    else:
        ker = (targets[:, None, None] - s) ** (l - 1)
    xi = (s - lo[None, :, None]) * (2.0 * n) - 1.0
    basis = orthonormal_legendre_table(xi, k) * np.sqrt(2.0 * n)
    m = targets.size
    return np.einsum("mng,mngk->mnk", w * ker, basis).reshape(m, n * k)


def piecewise_eval(coeffs, n, k, ts):
    """Evaluate a piecewise polynomial with per-cell orthonormal coefficients.

    At interior cell boundaries the left cell's value is used; t = 0 uses
    the first cell.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    idx = np.ceil(ts * n).astype(np.int64) - 1
    np.clip(idx, 0, n - 1, out=idx)
    xi = (ts - idx / n) * (2.0 * n) - 1.0
    basis = orthonormal_legendre_table(xi, k) * np.sqrt(2.0 * n)
    c = np.asarray(coeffs, dtype=np.float64).reshape(n, k)
    return np.einsum("mk,mk->m", basis, c[idx])
