"""Norms, duality mappings and Bregman distances on L^p(0,1) and C[0,1].

Functions are carried either as PiecewisePoly splines or as SampledFunction
objects.  A SampledFunction built by ``SampledFunction.from_callable`` (or
``from_poly``) stores its values at the nodes of a composite Gauss-Legendre
rule together with the rule's weights; every integral below is then the
corresponding weighted sum.  Because pointwise identities between integrands
translate into identities between weighted sums, the duality-mapping and
Bregman identities hold at the discrete level to machine precision, not just
up to quadrature error.

For 1 < p < infinity the duality mapping of L^p with gauge power
q = max(2, p) is

    (J_q w)(x) = ||w||^(q-p) |w(x)|^(p-1) sign(w(x)),

its inverse is the duality mapping of L^(p*) with power q* = q/(q-1),
and the Bregman distance induced by (1/q)||.||^q is

    D_q(u~, u) = (1/q)||u~||^q - (1/q)||u||^q + <J_q(u), u - u~>.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_QUAD_CELLS, GAUSS_ORDER, SUP_SAMPLES_PER_CELL
from .splines import Mesh, PiecewisePoly, gauss_rule

__all__ = ["SpaceSpec", "SampledFunction", "lp_norm", "sup_norm", "inner",
           "duality_map", "duality_map_inverse", "bregman_distance",
           "bregman_symmetric"]


@dataclass(frozen=True)
class SpaceSpec:
    """Either L^p(0,1) (kind='Lp', with exponent p) or C[0,1] (kind='C')."""

    kind: str
    p: float | None = None

    def __post_init__(self):
        if self.kind == "Lp":
            if self.p is None or not (1.0 <= self.p < math.inf):
                raise ValueError("Lp space needs an exponent p in [1, inf)")
        elif self.kind == "C":
            if self.p is not None:
                raise ValueError("C[0,1] carries no exponent")
        else:
            raise ValueError(f"unknown space kind {self.kind!r}")

    @property
    def q(self):
        """Gauge power of the duality mapping, max(2, p)."""
        self._require_duality()
        return max(2.0, self.p)

    @property
    def p_dual(self):
        self._require_duality()
        return self.p / (self.p - 1.0)

    @property
    def q_dual(self):
        q = self.q
        return q / (q - 1.0)

    def dual(self):
        """The dual space L^(p*)."""
        return SpaceSpec("Lp", self.p_dual)

    def _require_duality(self):
        if self.kind != "Lp" or not (1.0 < self.p < math.inf):
            raise ValueError("duality machinery requires L^p with 1 < p < inf")


def quadrature_breaks(cells=DEFAULT_QUAD_CELLS, mesh=None, extra=(), grade_zero=0):
    """Breakpoints of a composite quadrature grid on [0,1].

    Starts from a uniform grid (or the given mesh), merges any extra
    breakpoints, and optionally grades geometrically towards 0 to resolve
    endpoint singularities such as s^(1/2).
    """
    base = mesh.breakpoints() if mesh is not None else np.linspace(0.0, 1.0, cells + 1)
    pts = set(np.round(base, 15))
    pts.update(np.round(np.asarray(extra, dtype=float), 15))
    if grade_zero:
        first = min(p for p in pts if p > 0)
        pts.update(first * 0.5 ** np.arange(1, grade_zero + 1))
    return np.array(sorted(pts))


def composite_gauss(breaks, order=GAUSS_ORDER):
    """Nodes and weights of the per-interval Gauss rule on the breakpoints."""
    gl_x, gl_w = gauss_rule(order)
    lo = breaks[:-1]
    half = 0.5 * np.diff(breaks)
    x = (lo + half)[:, None] + half[:, None] * gl_x
    w = half[:, None] * gl_w
    return x.ravel(), w.ravel()


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Function values on a grid covering [0,1].

    When ``weights`` is present the grid points are quadrature nodes (plus
    the two endpoints, carrying zero weight) and integrals are weighted
    sums.  Without weights the object only supports sup-norm style use or
    gets re-interpolated onto a quadrature grid.
    """

    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if g.ndim != 1 or g.shape != v.shape:
            raise ValueError("grid and values must be matching 1-d arrays")
        if g.size == 0:
            raise ValueError("empty grid")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if abs(g[0]) > 1e-14 or abs(g[-1] - 1.0) > 1e-14:
            raise ValueError("grid must cover [0,1]")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite input")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if self.weights is not None:
            object.__setattr__(self, "weights",
                               np.asarray(self.weights, dtype=np.float64))

    @classmethod
    def from_callable(cls, f, cells=DEFAULT_QUAD_CELLS, order=GAUSS_ORDER,
                      mesh=None, extra_breaks=(), grade_zero=0):
        breaks = quadrature_breaks(cells, mesh, extra_breaks, grade_zero)
        x, w = composite_gauss(breaks, order)
        grid = np.concatenate(([0.0], x, [1.0]))
        weights = np.concatenate(([0.0], w, [0.0]))
        vals = np.asarray(f(grid), dtype=np.float64)
        return cls(grid, vals, weights)

    @classmethod
    def from_poly(cls, p: PiecewisePoly, order=GAUSS_ORDER, refine=1):
        breaks = quadrature_breaks(mesh=Mesh(p.mesh.n * refine))
        x, w = composite_gauss(breaks, order)
        grid = np.concatenate(([0.0], x, [1.0]))
        weights = np.concatenate(([0.0], w, [0.0]))
        return cls(grid, p.eval(grid), weights)

    def with_values(self, values):
        return SampledFunction(self.grid, values, self.weights)

    def same_grid(self, other):
        return (self.grid.shape == other.grid.shape
                and np.array_equal(self.grid, other.grid))


def _as_sampled(f, like=None, **kw):
    """Coerce input to a SampledFunction on a quadrature grid."""
    if isinstance(f, SampledFunction):
        if f.weights is not None:
            return f
        target = like if like is not None else SampledFunction.from_callable(
            lambda t: np.interp(t, f.grid, f.values), **kw)
        return target.with_values(np.interp(target.grid, f.grid, f.values))
    if isinstance(f, PiecewisePoly):
        if like is not None:
            return like.with_values(f.eval(like.grid))
        return SampledFunction.from_poly(f)
    if callable(f):
        if like is not None:
            return like.with_values(np.asarray(f(like.grid), dtype=np.float64))
        return SampledFunction.from_callable(f, **kw)
    raise TypeError(f"cannot interpret {type(f).__name__} as a function on [0,1]")


def _pair(a, b):
    """Bring two functions onto one shared quadrature grid."""
    if isinstance(a, SampledFunction) and a.weights is not None:
        return a, _as_sampled(b, like=a)
    if isinstance(b, SampledFunction) and b.weights is not None:
        return _as_sampled(a, like=b), b
    sa = _as_sampled(a)
    return sa, _as_sampled(b, like=sa)


def lp_norm(f, spec, order=GAUSS_ORDER):
    """The L^p(0,1) norm, by composite Gauss-Legendre quadrature.

    PiecewisePoly inputs are sampled exactly at the nodes of their own
    mesh's rule; weighted SampledFunction inputs use their stored rule.
    p = 1 is allowed here (norm evaluation only).
    """
    if spec.kind != "Lp":
        raise ValueError("lp_norm needs an Lp space spec")
    if isinstance(f, PiecewisePoly):
        f = SampledFunction.from_poly(f, order=order)
    else:
        f = _as_sampled(f, order=order)
    return float(np.sum(f.weights * np.abs(f.values) ** spec.p) ** (1.0 / spec.p))


def sup_norm(f, samples_per_cell=SUP_SAMPLES_PER_CELL):
    """Sup norm estimated by dense sampling (a lower bound converging to
    the true sup norm as the sampling refines)."""
    if isinstance(f, PiecewisePoly):
        t = np.linspace(0.0, 1.0, samples_per_cell * f.mesh.n + 1)
        return float(np.max(np.abs(f.eval(t))))
    if isinstance(f, SampledFunction):
        return float(np.max(np.abs(f.values)))
    t = np.linspace(0.0, 1.0, samples_per_cell * DEFAULT_QUAD_CELLS + 1)
    return float(np.max(np.abs(np.asarray(f(t)))))


def inner(f, g):
    """<f, g> = int_0^1 f g ds on a shared quadrature grid."""
    sf, sg = _pair(f, g)
    if not sf.same_grid(sg):
        sg = _as_sampled(sg, like=sf)
    return float(np.sum(sf.weights * sf.values * sg.values))


def _pointwise_duality(values, norm, p, q):
    if norm == 0.0:
        return np.zeros_like(values)
    return norm ** (q - p) * np.abs(values) ** (p - 1.0) * np.sign(values)


def duality_map(w, spec, power=None):
    """J_q : L^p -> L^(p*) with gauge power q (default max(2, p)).

    Satisfies <J_q(w), w> = ||w||^q exactly at the quadrature level.
    """
    spec._require_duality()
    p = spec.p
    q = spec.q if power is None else power
    sw = _as_sampled(w)
    norm = lp_norm(sw, spec)
    return sw.with_values(_pointwise_duality(sw.values, norm, p, q))


def duality_map_inverse(z, spec, power=None):
    """Inverse of duality_map: the duality mapping of L^(p*) with power q*."""
    spec._require_duality()
    q = spec.q if power is None else power
    q_star = q / (q - 1.0)
    sz = _as_sampled(z)
    norm = lp_norm(sz, spec.dual())
    return sz.with_values(_pointwise_duality(sz.values, norm, spec.p_dual, q_star))


def bregman_distance(u_tilde, u, spec, power=None):
    """D_q(u~, u) = (1/q)||u~||^q - (1/q)||u||^q + <J_q(u), u - u~>.

    Nonnegative, and zero iff the arguments coincide (1 < p < inf).
    """
    spec._require_duality()
    q = spec.q if power is None else power
    su_t, su = _pair(u_tilde, u)
    j_u = duality_map(su, spec, power=q)
    val = (lp_norm(su_t, spec) ** q / q - lp_norm(su, spec) ** q / q
           + float(np.sum(su.weights * j_u.values * (su.values - su_t.values))))
    return val


def bregman_symmetric(u_tilde, u, spec, power=None):
    """Symmetric Bregman distance <J_q(u) - J_q(u~), u - u~>."""
    spec._require_duality()
    q = spec.q if power is None else power
    su_t, su = _pair(u_tilde, u)
    j_u = duality_map(su, spec, power=q)
    j_ut = duality_map(su_t, spec, power=q)
    return float(np.sum(su.weights * (j_u.values - j_ut.values)
                        * (su.values - su_t.values)))
