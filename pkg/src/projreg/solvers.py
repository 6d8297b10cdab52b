"""The three regularization methods.

* Collocation: find the spline u_n whose image matches the data at every
  collocation node (square linear system, direct factorization).
* Least squares: minimize ||A u_n - f||_{L^r} over the spline space, by
  damped Newton on the eps-smoothed power objective (equivalent to damped
  iteratively reweighted least squares).
* Least error: among all functions matching the data at the nodes, return
  the one of minimal L^p norm.  Its solution has the closed form
  u_n = J_{q*}(A* v_n) with dual coefficients v_n solving a nonlinear
  interpolation system, solved here by damped Newton with analytic
  Jacobian, initialized from the p = 2 (minimum L^2 norm) solution.

The least-error solver discretizes all integrals on one composite Gauss
grid whose cells are split at the collocation nodes; the discrete problem
is then itself an exact minimum-norm problem, so the method's structural
identities (dual identity, norm monotonicity under nested nodes) hold at
the discrete level to solver tolerance.
"""

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

from .config import GAUSS_ORDER
from .operators import (CollocationScheme, DiracCombo, adjoint_matrix,
                        collocation_matrix, forward_matrix)
from .spaces import SampledFunction, SpaceSpec, composite_gauss, lp_norm
from .splines import Mesh, PiecewisePoly

__all__ = ["SolveResult", "solve_collocation", "solve_least_squares",
           "solve_least_error", "residual"]

COND_LIMIT = 1e14


@dataclass
class SolveResult:
    """A computed approximation plus solver diagnostics.

    ``u`` is a PiecewisePoly for collocation/least squares and a
    SampledFunction for least error (whose solution is not a spline for
    p != 2); ``eval_fn``/``forward_fn`` evaluate u and Au anywhere on
    demand.  ``residual_C`` is filled in by ``residual`` once a data
    reference on a dense grid is available.
    """

    u: object
    method: str
    residual_nodes: float
    iterations: int
    converged: bool
    condition_estimate: float
    dual: DiracCombo | None = None
    residual_C: float | None = None
    eval_fn: object = None
    forward_fn: object = None
    diagnostics: dict = field(default_factory=dict)


@lru_cache(maxsize=512)
def _collocation_lu(kernel, scheme, trial_k, order):
    mat = np.asarray(collocation_matrix(kernel, scheme, trial_k, order))
    cond = float(np.linalg.cond(mat))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise np.linalg.LinAlgError(
            f"collocation system numerically singular (cond ~ {cond:.3e}); "
            "the sampled operator has nontrivial kernel on the trial space")
    return mat, scipy.linalg.lu_factor(mat), cond


def solve_collocation(kernel, scheme, trial_k, f_nodes, order=GAUSS_ORDER):
    """Solve  (A u_n)(t_{i,j}) = f_{i,j}  for u_n in the order-k spline space.

    Requires as many nodes per cell as trial basis functions (square
    system).  The factorization is cached per (kernel, scheme, k), so
    sweeping noise realizations at fixed geometry costs only triangular
    solves.
    """
    if scheme.k != trial_k:
        raise ValueError("square collocation needs k nodes per cell "
                         f"(scheme has {scheme.k}, trial space {trial_k})")
    f_nodes = np.asarray(f_nodes, dtype=float)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mat, lu, cond = _collocation_lu(kernel, scheme, trial_k, order)
    coeffs = scipy.linalg.lu_solve(lu, f_nodes)
    u = PiecewisePoly(scheme.mesh, trial_k, coeffs.reshape(scheme.mesh.n, trial_k))
    res_nodes = float(np.max(np.abs(mat @ coeffs - f_nodes))) if f_nodes.size else 0.0
    diagnostics = {}
    if caught:
        diagnostics["assembly_warnings"] = [str(c.message) for c in caught]
    return SolveResult(
        u=u, method="collocation",
        residual_nodes=res_nodes, iterations=1, converged=True,
        condition_estimate=cond,
        eval_fn=u.eval,
        forward_fn=lambda ts: forward_matrix(kernel, scheme.mesh, trial_k,
                                             ts, order) @ coeffs,
        diagnostics=diagnostics,
    )


def _ls_state(M, W, f, coeffs, r, eps):
    res = M @ coeffs - f
    sq = res * res + eps * eps
    phi = float(np.sum(W * sq ** (0.5 * r)) / r)
    grad = M.T @ (W * sq ** (0.5 * r - 1.0) * res)
    return res, sq, phi, grad


def solve_least_squares(kernel, mesh, trial_k, f_delta, F_spec,
                        order=GAUSS_ORDER, max_iter=200, grad_tol=1e-10):
    """Minimize ||A u_n - f_delta||_{L^r} over the spline space, 1 < r < inf.

    The weights |res|^(r-2) are smoothed to (res^2 + eps^2)^((r-2)/2) with
    eps = 1e-12 * scale; each damped IRLS step is a Newton step on the
    smoothed objective.  For r = 2 this is a single normal-equations solve.
    """
    if F_spec.kind != "Lp" or not (1.0 < F_spec.p < np.inf):
        raise ValueError("least squares needs F = L^r with 1 < r < inf")
    r = F_spec.p
    if not (isinstance(f_delta, SampledFunction) and f_delta.weights is not None):
        raise ValueError("f_delta must be a SampledFunction on a quadrature grid")
    M = forward_matrix(kernel, mesh, trial_k, f_delta.grid, order)
    W = f_delta.weights
    f = f_delta.values
    scale = max(1.0, lp_norm(f_delta, F_spec))

    H0 = M.T @ (W[:, None] * M)
    cond = float(np.linalg.cond(H0))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise np.linalg.LinAlgError(
            f"trial space is rank deficient under A (cond ~ {cond:.3e})")
    coeffs = scipy.linalg.solve(H0, M.T @ (W * f), assume_a="pos")

    iterations = 1
    converged = True
    if r != 2.0:
        eps = 1e-12 * scale
        res, sq, phi, grad = _ls_state(M, W, f, coeffs, r, eps)
        converged = False
        for iterations in range(2, max_iter + 2):
            # stationarity of the norm objective J = ||res||_r per basis
            # direction; at J ~ 0 the norm is nonsmooth, so a residual at
            # roundoff level counts as converged outright
            norm_obj = (r * phi) ** (1.0 / r)
            if norm_obj <= 1e-10 * scale:
                converged = True
                break
            if np.max(np.abs(grad)) * norm_obj ** (1.0 - r) <= grad_tol * scale:
                converged = True
                break
            curv = sq ** (0.5 * r - 2.0) * (sq + (r - 2.0) * res * res)
            H = M.T @ ((W * curv)[:, None] * M)
            step = scipy.linalg.solve(H, -grad, assume_a="pos")
            t = 1.0
            for _ in range(50):
                trial = coeffs + t * step
                n_res, n_sq, n_phi, n_grad = _ls_state(M, W, f, trial, r, eps)
                if n_phi <= phi + 1e-4 * t * float(grad @ step):
                    break
                t *= 0.5
            coeffs, res, sq, phi, grad = trial, n_res, n_sq, n_phi, n_grad

    u = PiecewisePoly(mesh, trial_k, coeffs.reshape(mesh.n, trial_k))
    return SolveResult(
        u=u, method="least_squares",
        residual_nodes=float(np.max(np.abs(M @ coeffs - f))),
        iterations=iterations, converged=converged, condition_estimate=cond,
        eval_fn=u.eval,
        forward_fn=lambda ts: forward_matrix(kernel, mesh, trial_k, ts, order) @ coeffs,
        diagnostics={"objective": lp_norm(f_delta.with_values(M @ coeffs - f), F_spec),
                     "scale": scale},
    )


def least_error_grid(scheme, subdiv=4, extra=()):
    """Quadrature breakpoints split at the collocation nodes (plus extras).

    Passing the same breakpoints to every solve of a nested node family
    makes the discrete problems exactly nested, which the norm-monotonicity
    and monotone-error-rule guarantees require.
    """
    pts = set(np.round(scheme.mesh.breakpoints(), 15))
    pts.update(np.round(scheme.nodes(), 15))
    pts.update(np.round(np.asarray(extra, dtype=float), 15))
    breaks = np.array(sorted(pts))
    fine = np.concatenate([np.linspace(a, b, subdiv + 1)[:-1]
                           for a, b in zip(breaks[:-1], breaks[1:])] + [[1.0]])
    return fine


def _dual_to_primal(z, big_n, p_star, q_star):
    # u = J_{q*}(A* v) pointwise: N^(q*-p*) |z|^(p*-1) sign(z)
    if big_n == 0.0:
        return np.zeros_like(z)
    return big_n ** (q_star - p_star) * np.abs(z) ** (p_star - 1.0) * np.sign(z)


def solve_least_error(kernel, scheme, f_nodes, E_spec, order=GAUSS_ORDER,
                      quad_breaks=None, subdiv=4, max_iter=80,
                      multistart=0, seed=0):
    """Minimal-L^p-norm interpolation of the data at the collocation nodes.

    Solves <z, A J_{q*}(A* v)> = <z, f> for all node functionals z by
    damped Newton on the dual coefficients v (analytic Jacobian), starting
    from the p = 2 minimum-norm solution.  Returns u_n = J_{q*}(A* v_n) as
    a SampledFunction plus a closure for evaluation on demand.
    """
    if E_spec.kind != "Lp" or not (1.0 < E_spec.p < np.inf):
        raise ValueError("least error needs E = L^p with 1 < p < inf")
    p = E_spec.p
    q = max(2.0, p)
    p_star = p / (p - 1.0)
    q_star = q / (q - 1.0)
    nodes = scheme.nodes()
    f_nodes = np.asarray(f_nodes, dtype=float)
    scale = max(1.0, float(np.max(np.abs(f_nodes))) if f_nodes.size else 0.0)

    breaks = quad_breaks if quad_breaks is not None else least_error_grid(scheme, subdiv)
    x, w = composite_gauss(breaks, order)
    B = adjoint_matrix(kernel, nodes, x).T          # (Nq, M): K(t_m, x_i)
    C = (w[:, None] * B).T                          # discrete forward at nodes

    gram = C @ B                                    # = B^T diag(w) B, SPD
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise np.linalg.LinAlgError(
            f"A* restricted to the node functionals is numerically rank "
            f"deficient (cond ~ {cond:.3e})")
    v2 = scipy.linalg.solve(gram, f_nodes, assume_a="pos")

    def constraint(v):
        z = B @ v
        big_n = float(np.sum(w * np.abs(z) ** p_star) ** (1.0 / p_star))
        u_vals = _dual_to_primal(z, big_n, p_star, q_star)
        return z, big_n, u_vals, C @ u_vals - f_nodes

    def newton(v_init):
        # the constraint contract is 1e-8 * scale; Newton aims two orders
        # tighter and a line-search stall inside the contract still counts
        v = v_init.copy()
        for it in range(1, max_iter + 1):
            z, big_n, u_vals, fval = constraint(v)
            norm_f = float(np.max(np.abs(fval)))
            if norm_f <= 1e-10 * scale:
                return v, z, big_n, u_vals, it, True
            psi = np.abs(z) ** (p_star - 1.0) * np.sign(z)
            az = np.maximum(np.abs(z), 1e-14 * (np.max(np.abs(z)) + 1e-300))
            dpsi = (p_star - 1.0) * az ** (p_star - 2.0)
            core = big_n ** (q_star - p_star) * (C @ (dpsi[:, None] * B))
            coupling = ((q_star - p_star) * big_n ** (q_star - 2.0 * p_star)
                        * np.outer(C @ psi, B.T @ (w * psi)))
            step = scipy.linalg.solve(core + coupling, -fval)
            t = 1.0
            stalled = True
            for _ in range(40):
                if np.max(np.abs(constraint(v + t * step)[3])) < norm_f:
                    stalled = False
                    break
                t *= 0.5
            if stalled:
                return v, z, big_n, u_vals, it, norm_f <= 1e-8 * scale
            v = v + t * step
        z, big_n, u_vals, fval = constraint(v)
        return v, z, big_n, u_vals, max_iter, \
            float(np.max(np.abs(fval))) <= 1e-8 * scale

    if not np.any(f_nodes):
        v = np.zeros_like(f_nodes)
        z = np.zeros(x.size)
        big_n = 0.0
        iters, ok = 0, True
    elif p == 2.0:
        # q* = p* = 2 makes the pointwise map the identity: linear system
        v = v2
        z = B @ v2
        big_n = float(np.sum(w * z * z) ** 0.5)
        iters, ok = 1, True
    else:
        # rescale the p=2 start so that ||u(v0)|| matches the p=2 norm
        z2 = B @ v2
        norm2 = float(np.sum(w * np.abs(z2) ** p) ** (1.0 / p))
        n2 = float(np.sum(w * np.abs(z2) ** p_star) ** (1.0 / p_star))
        s = (norm2 ** (1.0 / (q_star - 1.0)) / n2) if n2 > 0 else 1.0
        v, z, big_n, _, iters, ok = newton(s * v2)
    u_vals = _dual_to_primal(z, big_n, p_star, q_star)

    diagnostics = {"quad_points": x.size, "scale": scale}
    if multistart and np.any(f_nodes):
        rng = np.random.Generator(np.random.Philox(seed))
        spread = 0.0
        for _ in range(multistart):
            alt = newton(rng.standard_normal(v.size) * np.linalg.norm(v)
                         / np.sqrt(v.size))
            if alt[5]:
                spread = max(spread, float(np.max(np.abs(alt[0] - v))))
        diagnostics["multistart_spread"] = spread

    def eval_fn(ts):
        z_t = adjoint_matrix(kernel, nodes, np.atleast_1d(ts)).T @ v
        return _dual_to_primal(z_t, big_n, p_star, q_star)

    grid = np.concatenate(([0.0], x, [1.0]))
    weights = np.concatenate(([0.0], w, [0.0]))
    u_ends = eval_fn(np.array([0.0, 1.0]))
    u = SampledFunction(grid, np.concatenate(([u_ends[0]], u_vals, [u_ends[1]])),
                        weights)

    def forward_fn(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return adjoint_matrix(kernel, ts, x) @ (w * u.values[1:-1])

    return SolveResult(
        u=u, method="least_error",
        residual_nodes=float(np.max(np.abs(C @ u_vals - f_nodes))) if f_nodes.size else 0.0,
        iterations=iters, converged=ok, condition_estimate=cond,
        dual=DiracCombo(nodes, v), eval_fn=eval_fn, forward_fn=forward_fn,
        diagnostics=diagnostics,
    )


def residual(result, f_reference, F_spec):
    """||A u_n - f_ref|| in the requested norm.

    For C[0,1] the reference's grid doubles as the dense sampling grid; for
    L^r the reference must carry quadrature weights.  Stores the C-norm
    value on the result for later inspection.
    """
    if not isinstance(f_reference, SampledFunction):
        raise ValueError("f_reference must be a SampledFunction")
    a_vals = result.forward_fn(f_reference.grid)
    diff = a_vals - f_reference.values
    if F_spec.kind == "C":
        value = float(np.max(np.abs(diff)))
        result.residual_C = value
        return value
    if f_reference.weights is None:
        raise ValueError("L^r residual needs a quadrature-grid reference")
    return lp_norm(f_reference.with_values(diff), F_spec)
