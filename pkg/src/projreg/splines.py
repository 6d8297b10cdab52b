"""Uniform meshes and discontinuous piecewise-polynomial trial spaces.

The trial space of order k on an n-cell uniform mesh consists of functions
that are polynomials of degree <= k-1 on each cell, with no continuity
across cell boundaries.  Coefficients are stored in the per-cell
L2-orthonormal (scaled, shifted Legendre) basis, so the Euclidean norm of
the coefficient vector equals the L2(0,1) norm of the function.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from . import _accel
from .config import GAUSS_ORDER

__all__ = ["Mesh", "PiecewisePoly", "orthonormal_basis", "project",
           "refine_nested", "gauss_rule"]

_GAUSS_CACHE = {}


def gauss_rule(order):
    """Gauss-Legendre nodes and weights on [-1,1], cached."""
    if order not in _GAUSS_CACHE:
        _GAUSS_CACHE[order] = legendre.leggauss(order)
    return _GAUSS_CACHE[order]


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of [0,1] with n cells [(i-1)h, ih], h = 1/n."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("mesh needs at least one cell")

    @property
    def h(self):
        return 1.0 / self.n

    def breakpoints(self):
        return np.linspace(0.0, 1.0, self.n + 1)

    def cell(self, i):
        return (i * self.h, (i + 1) * self.h)


def refine_nested(mesh):
    """Dyadic refinement; endpoint node sets {i/n} nest into {i/2n}."""
    return Mesh(2 * mesh.n)


@dataclass(frozen=True, eq=False)
class PiecewisePoly:
    """Element of the order-k discontinuous spline space on a uniform mesh.

    coeffs has shape (n, k); row i holds the coefficients on cell i in the
    orthonormal Legendre basis of that cell.  Evaluation at interior cell
    boundaries uses the left cell (left-limit convention); t = 0 uses the
    first cell.
    """

    mesh: Mesh
    k: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64).reshape(self.mesh.n, self.k)
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite input")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if t_arr.size and (t_arr.min() < 0.0 or t_arr.max() > 1.0):
            raise ValueError("evaluation point outside [0,1]")
        vals = _accel.piecewise_eval(self.coeffs, self.mesh.n, self.k, t_arr)
        return vals[0] if np.isscalar(t) or np.ndim(t) == 0 else vals

    def l2_norm(self):
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other):
        self._check_compatible(other)
        return PiecewisePoly(self.mesh, self.k, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return PiecewisePoly(self.mesh, self.k, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return PiecewisePoly(self.mesh, self.k, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def _check_compatible(self, other):
        if self.mesh != other.mesh or self.k != other.k:
            raise ValueError("incompatible spline spaces")


def orthonormal_basis(cell, k):
    """The k L2(cell)-orthonormal Legendre polynomials, as callables.

    Returns numpy Polynomial-like objects; basis j has degree j and
    int_cell phi_a phi_b ds = delta_ab.
    """
    if k < 1:
        raise ValueError("polynomial order must be >= 1")
    a, b = cell
    out = []
    for j in range(k):
        coef = np.zeros(j + 1)
        coef[j] = 1.0
        scale = np.sqrt((2 * j + 1) / (b - a))
        out.append(legendre.Legendre(coef * scale, domain=[a, b]))
    return out


def _evaluate_source(f, points):
    """Evaluate a projection source (callable, PiecewisePoly or samples)."""
    if isinstance(f, PiecewisePoly):
        return f.eval(points)
    if callable(f):
        return np.asarray(f(points), dtype=np.float64)
    # sampled data: (grid, values) pair or object with those attributes
    grid = getattr(f, "grid", None)
    values = getattr(f, "values", None)
    if grid is None:
        grid, values = f
    return np.interp(points, grid, values)


def project(f, mesh, k, order=GAUSS_ORDER):
    """Cell-wise L2-orthogonal projection onto the order-k spline space.

    coeff[i, j] = int_{cell i} phi_{i,j}(s) f(s) ds.  Idempotent and
    homogeneous; exact (up to the Gauss rule) best L2 approximation per
    cell.
    """
    gl_x, gl_w = gauss_rule(order)
    n = mesh.n
    h = mesh.h
    lo = np.arange(n) * h
    s = lo[:, None] + 0.5 * h * (gl_x + 1.0)          # (n, G)
    w = 0.5 * h * gl_w
    vals = _evaluate_source(f, s.ravel()).reshape(n, order)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite input")
    xi = (s - lo[:, None]) * (2.0 * n) - 1.0
    basis = _accel.orthonormal_legendre_table(xi, k) * np.sqrt(2.0 * n)
    coeffs = np.einsum("ng,ngk->nk", w * vals, basis)
    return PiecewisePoly(mesh, k, coeffs)
