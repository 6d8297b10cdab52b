"""The integral operator, its action on splines, and the model problem.

The forward operator is (Au)(t) = int_0^1 K(t,s) u(s) ds.  Supported
kernels:

* ``volterra(l)``: K(t,s) = (t-s)^(l-1) for s < t, else 0.  This is the
  convolution model problem; with ``factorial_scaled=True`` the kernel is
  divided by (l-1)! and becomes the Green's function of D^l with
  homogeneous initial conditions.
* ``green(2)``: K1(t,s) = s(t-1) for s < t, symmetric, the Green's
  function of u'' with u(0) = u(1) = 0.
* ``green(4)``: K1(t,s) = -s^2 (1-t)^2 (s + 2st - 3t)/6, symmetric.
* ``tabulated``: samples on a tensor grid, bilinearly interpolated.

For the polynomial kernels all integrals against splines are evaluated by
Gauss rules on segments split at cell boundaries and at the kernel's
diagonal, so matrix entries are exact to machine precision.
"""

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _accel
from .config import GAUSS_ORDER
from .splines import Mesh, PiecewisePoly, gauss_rule

__all__ = ["Kernel", "CollocationScheme", "DiracCombo", "apply_A",
           "forward_matrix", "collocation_matrix", "adjoint_apply",
           "adjoint_matrix", "model_rhs"]


@dataclass(frozen=True)
class Kernel:
    """Integral-operator kernel descriptor (hashable, hence cacheable)."""

    kind: str                       # 'volterra' | 'green' | 'tabulated'
    order: int = 1                  # differential order l
    factorial_scaled: bool = False  # divide volterra kernel by (l-1)!
    table: tuple | None = None      # ((t...), (s...), (row-major K...))

    @classmethod
    def volterra(cls, l, factorial_scaled=False):
        if l < 1 or l != int(l):
            raise ValueError("volterra power l must be a positive integer")
        return cls("volterra", int(l), factorial_scaled)

    @classmethod
    def green(cls, l):
        if l not in (2, 4):
            raise ValueError("green kernels implemented for l in {2, 4}")
        return cls("green", l)

    @classmethod
    def tabulated(cls, t, s, values):
        t = tuple(float(x) for x in t)
        s = tuple(float(x) for x in s)
        vals = np.asarray(values, dtype=float).reshape(len(t), len(s))
        if not np.all(np.isfinite(vals)):
            raise ValueError("tabulated kernel must be finite")
        return cls("tabulated", 1, False, (t, s, tuple(vals.ravel())))

    @classmethod
    def from_csv(cls, path):
        """Load a tabulated kernel from (t, s, K) triples on a tensor grid."""
        ts, ss, kv = [], [], {}
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                if row[0].strip().lower() == "t":
                    continue
                t, s, k = (float(x) for x in row[:3])
                ts.append(t)
                ss.append(s)
                kv[(t, s)] = k
        t_grid = sorted(set(ts))
        s_grid = sorted(set(ss))
        vals = np.array([[kv[(t, s)] for s in s_grid] for t in t_grid])
        return cls.tabulated(t_grid, s_grid, vals)

    @property
    def scale(self):
        return 1.0 / math.factorial(self.order - 1) if self.factorial_scaled else 1.0


def kernel_values(kernel, t, s):
    """K(t, s), broadcasting over numpy arrays t and s."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if kernel.kind == "volterra":
        l = kernel.order
        below = s <= t
        if l == 1:
            return kernel.scale * below.astype(float)
        return kernel.scale * np.where(below, (t - s) ** (l - 1), 0.0)
    if kernel.kind == "green":
        if kernel.order == 2:
            k1 = s * (t - 1.0)
            k2 = t * (s - 1.0)
        else:
            k1 = -s**2 * (1.0 - t) ** 2 * (s + 2.0 * s * t - 3.0 * t) / 6.0
            k2 = -t**2 * (1.0 - s) ** 2 * (t + 2.0 * t * s - 3.0 * s) / 6.0
        return np.where(s <= t, k1, k2)
    if kernel.kind == "tabulated":
        return _tabulated_interp(kernel)(t, s)
    raise ValueError(f"unknown kernel kind {kernel.kind!r}")


@lru_cache(maxsize=32)
def _tabulated_interp(kernel):
    t_grid = np.array(kernel.table[0])
    s_grid = np.array(kernel.table[1])
    vals = np.array(kernel.table[2]).reshape(t_grid.size, s_grid.size)

    def interp(t, s):
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        it = np.clip(np.searchsorted(t_grid, t, side="right") - 1, 0, t_grid.size - 2)
        js = np.clip(np.searchsorted(s_grid, s, side="right") - 1, 0, s_grid.size - 2)
        ft = (t - t_grid[it]) / (t_grid[it + 1] - t_grid[it])
        fs = (s - s_grid[js]) / (s_grid[js + 1] - s_grid[js])
        return ((1 - ft) * (1 - fs) * vals[it, js]
                + (1 - ft) * fs * vals[it, js + 1]
                + ft * (1 - fs) * vals[it + 1, js]
                + ft * fs * vals[it + 1, js + 1])

    return interp


@dataclass(frozen=True)
class CollocationScheme:
    """Collocation parameters 0 < c_1 < ... < c_k <= 1 on a uniform mesh.

    The node set t_{i,j} = (i-1+c_j) h realizes the point-evaluation test
    functionals; sampling a function at the nodes realizes the projection
    of data onto them.
    """

    mesh: Mesh
    c: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.c)
        if len(c) < 1 or min(c) <= 0.0 or max(c) > 1.0 or np.any(np.diff(c) <= 0):
            raise ValueError("need 0 < c_1 < ... < c_k <= 1")
        object.__setattr__(self, "c", c)

    @property
    def k(self):
        return len(self.c)

    def nodes(self):
        h = self.mesh.h
        i = np.arange(self.mesh.n)[:, None]
        return ((i + np.asarray(self.c)) * h).ravel()

    def refine(self):
        return CollocationScheme(Mesh(2 * self.mesh.n), self.c)


@dataclass(frozen=True, eq=False)
class DiracCombo:
    """Weighted combination of point evaluations; the dual norm in C[0,1]*
    of such a discrete measure is the total variation sum(|weights|)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        n = np.atleast_1d(np.asarray(self.nodes, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if n.shape != w.shape:
            raise ValueError("nodes and weights must match")
        if np.unique(n).size != n.size:
            raise ValueError("nodes must be distinct")
        order = np.argsort(n)
        object.__setattr__(self, "nodes", n[order])
        object.__setattr__(self, "weights", w[order])

    def tv_norm(self):
        return float(np.sum(np.abs(self.weights)))

    def __sub__(self, other):
        merged = np.unique(np.concatenate([self.nodes, other.nodes]))
        w = np.zeros_like(merged)
        w[np.searchsorted(merged, self.nodes)] += self.weights
        w[np.searchsorted(merged, other.nodes)] -= other.weights
        return DiracCombo(merged, w)


def forward_matrix(kernel, mesh, trial_k, targets, order=GAUSS_ORDER):
    """Matrix of (A phi)(t) for every target t and trial basis function phi.

    Exact for the polynomial kernels; for tabulated kernels a fixed-order
    Gauss rule is applied per cell and a warning is emitted when the table
    is coarser than the mesh.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if kernel.kind == "volterra":
        mat = _accel.volterra_design_matrix(targets, mesh.n, trial_k,
                                            kernel.order, *gauss_rule(order))
        return kernel.scale * mat if kernel.factorial_scaled else mat
    return _forward_matrix_generic(kernel, mesh, trial_k, targets, order)


def _forward_matrix_generic(kernel, mesh, trial_k, targets, order):
    if kernel.kind == "tabulated":
        t_grid = kernel.table[0]
        if max(np.diff(t_grid).max(), np.diff(kernel.table[1]).max()) > mesh.h + 1e-12:
            warnings.warn("tabulated kernel is coarser than the mesh; "
                          "matrix entries are interpolation-limited",
                          stacklevel=3)
    n, h = mesh.n, mesh.h
    gl_x, gl_w = gauss_rule(order)
    lo = np.arange(n) * h
    m = targets.size
    out = np.zeros((m, n * trial_k))
    # split every cell at the target so each segment avoids the kernel's kink
    for cut_lo, cut_hi in ((lo, np.clip(targets[:, None], lo, lo + h)),
                           (np.clip(targets[:, None], lo, lo + h), lo + h)):
        cut_lo = np.broadcast_to(cut_lo, (m, n))
        half = 0.5 * (cut_hi - cut_lo)
        mid = 0.5 * (cut_hi + cut_lo)
        s = mid[..., None] + half[..., None] * gl_x          # (m, n, G)
        w = half[..., None] * gl_w
        ker = kernel_values(kernel, targets[:, None, None], s)
        xi = (s - lo[None, :, None]) * (2.0 * n) - 1.0
        basis = _accel.orthonormal_legendre_table(xi, trial_k) * np.sqrt(2.0 * n)
        out += np.einsum("mng,mngk->mnk", w * ker, basis).reshape(m, n * trial_k)
    return out


@lru_cache(maxsize=512)
def _collocation_matrix_cached(kernel, scheme, trial_k, order):
    mat = forward_matrix(kernel, scheme.mesh, trial_k, scheme.nodes(), order)
    mat.flags.writeable = False
    return mat


@lru_cache(maxsize=256)
def dense_forward_matrix(kernel, mesh, trial_k, samples_per_cell, order=GAUSS_ORDER):
    """Forward matrix on the canonical dense grid of the mesh, cached so
    that residual evaluation across noise realizations reuses geometry."""
    grid = np.linspace(0.0, 1.0, samples_per_cell * mesh.n + 1)
    mat = forward_matrix(kernel, mesh, trial_k, grid, order)
    grid.flags.writeable = False
    mat.flags.writeable = False
    return grid, mat


def collocation_matrix(kernel, scheme, trial_k, order=GAUSS_ORDER):
    """Rows are (A phi)(t_{i,j}) over the collocation nodes; block lower
    triangular for Volterra kernels.  Cached per (kernel, scheme, k)."""
    if kernel.kind == "tabulated":
        return forward_matrix(kernel, scheme.mesh, trial_k, scheme.nodes(), order)
    return _collocation_matrix_cached(kernel, scheme, trial_k, order)


def apply_A(kernel, u: PiecewisePoly, t, order=GAUSS_ORDER):
    """(Au)(t); exact for polynomial kernels against splines."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if t_arr.size and (t_arr.min() < 0.0 or t_arr.max() > 1.0):
        raise ValueError("evaluation point outside [0,1]")
    vals = forward_matrix(kernel, u.mesh, u.k, t_arr, order) @ u.coeffs.ravel()
    return float(vals[0]) if np.ndim(t) == 0 else vals


def adjoint_matrix(kernel, nodes, s):
    """K(t_m, s_i) for point functionals at ``nodes``; A* of a Dirac combo
    with weights lam is  (A* z)(s) = sum_m lam_m K(t_m, s)."""
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    s = np.atleast_1d(np.asarray(s, dtype=float))
    return kernel_values(kernel, nodes[:, None], s[None, :])


def adjoint_apply(kernel, z: DiracCombo, s):
    """(A* z)(s) = sum_m lambda_m K(t_m, s)."""
    vals = z.weights @ adjoint_matrix(kernel, z.nodes, s)
    return float(vals[0]) if np.ndim(s) == 0 else vals


def model_rhs(r, l, t, factorial_scaled=False):
    """Exact data for the convolution model problem with u*(s) = s^r:

        f(t) = int_0^t (t-s)^(l-1) s^r ds = B(r+1, l) t^(r+l)

    with B the Beta function; B(r+1, l) = (l-1)! / prod_{j=1..l} (r+j).
    """
    if r <= -1:
        raise ValueError("exponent r must exceed -1")
    if l < 1 or l != int(l):
        raise ValueError("l must be a positive integer")
    l = int(l)
    beta = math.factorial(l - 1) / math.prod(r + j for j in range(1, l + 1))
    if factorial_scaled:
        beta /= math.factorial(l - 1)
    t = np.asarray(t, dtype=float)
    return beta * t ** (r + l)
