import numpy as np
import pytest
from scipy.integrate import quad

from projreg.operators import (CollocationScheme, DiracCombo, Kernel,
                               adjoint_apply, apply_A, collocation_matrix,
                               forward_matrix, kernel_values, model_rhs)
from projreg.spaces import SampledFunction, composite_gauss, inner, \
    quadrature_breaks
from projreg.splines import Mesh, PiecewisePoly, orthonormal_basis, project


def test_kernel_constructors():
    with pytest.raises(ValueError):
        Kernel.volterra(0)
    with pytest.raises(ValueError):
        Kernel.green(3)
    assert Kernel.volterra(2).scale == 1.0
    assert Kernel.volterra(3, factorial_scaled=True).scale == 0.5


def test_scheme_validation():
    with pytest.raises(ValueError):
        CollocationScheme(Mesh(2), (1.0, 0.7))
    with pytest.raises(ValueError):
        CollocationScheme(Mesh(2), (0.0, 1.0))
    with pytest.raises(ValueError):
        CollocationScheme(Mesh(2), (0.5, 1.2))
    sch = CollocationScheme(Mesh(2), (0.7, 1.0))
    np.testing.assert_allclose(sch.nodes(), [0.35, 0.5, 0.85, 1.0])


def test_apply_zero_function():
    kernel = Kernel.volterra(2)
    u = PiecewisePoly(Mesh(3), 2, np.zeros((3, 2)))
    assert np.all(apply_A(kernel, u, np.linspace(0, 1, 9)) == 0.0)


def test_apply_constant_l2():
    kernel = Kernel.volterra(2)
    u = project(lambda s: np.ones_like(s), Mesh(3), 2)
    t = np.linspace(0, 1, 33)
    np.testing.assert_allclose(apply_A(kernel, u, t), t**2 / 2, atol=1e-14)


def test_apply_matches_model_rhs_for_sqrt():
    # direct graded quadrature of the convolution against s^(1/2)
    kernel = Kernel.volterra(2)
    for t in (0.3, 0.7, 1.0):
        breaks = t * quadrature_breaks(cells=8, grade_zero=40)
        x, w = composite_gauss(np.unique(np.concatenate([[0.0], breaks, [t]])))
        direct = np.sum(w * (t - x) * np.sqrt(x))
        assert direct == pytest.approx(4 / 15 * t**2.5, abs=1e-10)
        assert direct == pytest.approx(model_rhs(0.5, 2, t), abs=1e-10)


def test_collocation_matrix_unit_entry():
    mat = collocation_matrix(Kernel.volterra(1), CollocationScheme(Mesh(1), (1.0,)), 1)
    np.testing.assert_allclose(mat, [[1.0]], atol=1e-15)


def test_collocation_matrix_block_triangular():
    sch = CollocationScheme(Mesh(3), (0.7, 1.0))
    mat = np.asarray(collocation_matrix(Kernel.volterra(2), sch, 2))
    # basis supported right of a node contributes nothing
    for a, t in enumerate(sch.nodes()):
        for cell in range(3):
            if cell / 3 >= t:
                assert np.all(mat[a, 2 * cell:2 * cell + 2] == 0.0)


def test_collocation_matrix_vs_quad_oracle():
    sch = CollocationScheme(Mesh(2), (0.7, 1.0))
    mat = np.asarray(collocation_matrix(Kernel.volterra(2), sch, 2))
    for a, t in enumerate(sch.nodes()):
        for cell_i in range(2):
            cell = (0.5 * cell_i, 0.5 * cell_i + 0.5)
            for j, phi in enumerate(orthonormal_basis(cell, 2)):
                lo, hi = cell
                val = quad(lambda s: (t - s) * phi(s), lo, min(hi, t),
                           limit=200)[0] if t > lo else 0.0
                assert mat[a, 2 * cell_i + j] == pytest.approx(val, abs=1e-12)


@pytest.mark.parametrize("l", [2, 4])
def test_green_matrix_vs_quad_oracle(l):
    kernel = Kernel.green(l)
    targets = np.array([0.3, 0.8])
    mat = forward_matrix(kernel, Mesh(2), 2, targets)
    for a, t in enumerate(targets):
        for cell_i in range(2):
            lo, hi = 0.5 * cell_i, 0.5 * cell_i + 0.5
            for j, phi in enumerate(orthonormal_basis((lo, hi), 2)):
                pts = [t] if lo < t < hi else None
                val = quad(lambda s: float(kernel_values(kernel, t, s)) * phi(s),
                           lo, hi, points=pts, limit=200)[0]
                assert mat[a, 2 * cell_i + j] == pytest.approx(val, abs=1e-12)


def test_volterra_causality():
    # the value at t ignores the trial function right of t
    kernel = Kernel.volterra(2)
    rng = np.random.default_rng(1)
    coeffs = rng.standard_normal((4, 2))
    u1 = PiecewisePoly(Mesh(4), 2, coeffs)
    bumped = coeffs.copy()
    bumped[3] += 7.0
    u2 = PiecewisePoly(Mesh(4), 2, bumped)
    assert apply_A(kernel, u1, 0.7) == apply_A(kernel, u2, 0.7)


def test_adjoint_of_endpoint_functional():
    z = DiracCombo([1.0], [1.0])
    s = np.linspace(0, 1, 17)
    np.testing.assert_allclose(adjoint_apply(Kernel.volterra(1), z, s), 1.0)


def test_adjoint_of_midpoint_functional():
    z = DiracCombo([0.5], [1.0])
    s = np.linspace(0, 1, 17)
    np.testing.assert_allclose(adjoint_apply(Kernel.volterra(2), z, s),
                               np.maximum(0.5 - s, 0.0), atol=1e-15)


def test_adjoint_duality_identity():
    # <z, Au> = <A* z, u> with both sides quadratured independently
    kernel = Kernel.volterra(2)
    rng = np.random.default_rng(5)
    u = PiecewisePoly(Mesh(4), 2, rng.standard_normal((4, 2)))
    z = DiracCombo(rng.uniform(0.05, 1.0, 6), rng.standard_normal(6))
    lhs = float(z.weights @ apply_A(kernel, u, z.nodes))
    az = SampledFunction.from_callable(lambda s: adjoint_apply(kernel, z, s),
                                       mesh=Mesh(4), extra_breaks=z.nodes)
    assert lhs == pytest.approx(inner(az, u), abs=1e-10)


def test_model_rhs_values():
    t = np.linspace(0, 1, 23)
    np.testing.assert_allclose(model_rhs(0, 1, t), t)
    np.testing.assert_allclose(model_rhs(0.5, 2, t), 4 / 15 * t**2.5)
    np.testing.assert_allclose(model_rhs(1.5, 2, t), 4 / 35 * t**3.5)


def test_model_rhs_validation():
    with pytest.raises(ValueError):
        model_rhs(-1.0, 2, 0.5)
    with pytest.raises(ValueError):
        model_rhs(0.5, 0, 0.5)


def test_factorial_scaled_model_matches_kernel():
    kernel = Kernel.volterra(3, factorial_scaled=True)
    u = project(lambda s: np.ones_like(s), Mesh(2), 1)
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(apply_A(kernel, u, t),
                               model_rhs(0, 3, t, factorial_scaled=True),
                               atol=1e-14)


def test_collocation_matrices_nonsingular_on_grid():
    kernel = Kernel.volterra(2)
    for n in (1, 2, 5):
        for c in ((0.6, 1.0), (0.7, 1.0), (0.9, 1.0)):
            mat = np.asarray(collocation_matrix(kernel, CollocationScheme(Mesh(n), c), 2))
            assert np.isfinite(np.linalg.cond(mat))
            assert np.linalg.cond(mat) < 1e9


def test_dirac_combo_ops():
    with pytest.raises(ValueError):
        DiracCombo([0.5, 0.5], [1.0, 2.0])
    a = DiracCombo([0.25, 0.5], [1.0, -2.0])
    b = DiracCombo([0.5, 1.0], [0.5, 3.0])
    assert a.tv_norm() == 3.0
    diff = a - b
    np.testing.assert_allclose(diff.nodes, [0.25, 0.5, 1.0])
    np.testing.assert_allclose(diff.weights, [1.0, -2.5, -3.0])


def test_tabulated_kernel_csv_roundtrip(tmp_path):
    t_grid = np.linspace(0, 1, 41)
    s_grid = np.linspace(0, 1, 41)
    path = tmp_path / "kernel.csv"
    with open(path, "w") as fh:
        fh.write("t,s,K\n")
        for t in t_grid:
            for s in s_grid:
                fh.write(f"{float(t)!r},{float(s)!r},{float((1.0 + t) * s)!r}\n")
    kernel = Kernel.from_csv(path)
    tt, ss = np.meshgrid([0.31, 0.77], [0.12, 0.5], indexing="ij")
    np.testing.assert_allclose(kernel_values(kernel, tt, ss), (1 + tt) * ss,
                               atol=1e-12)


def test_tabulated_coarser_than_mesh_warns():
    t_grid = np.linspace(0, 1, 5)
    vals = np.ones((5, 5))
    kernel = Kernel.tabulated(t_grid, t_grid, vals)
    with pytest.warns(UserWarning, match="coarser"):
        forward_matrix(kernel, Mesh(16), 1, np.array([0.5]))
